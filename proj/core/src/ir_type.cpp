#include "igen/ir.hpp"
#include "igen/support.hpp"

#include <algorithm>
#include <cassert>

namespace igen {

struct Type::Node {
  Kind K;
  unsigned Bits = 0;
  uint64_t Count = 0;
  std::shared_ptr<const Node> Elem;
  std::vector<Type> Fields;
  std::vector<uint64_t> Offsets; // per-field byte offsets
  uint64_t Size = 0;
  uint64_t Align = 1;
};

static const std::shared_ptr<const Type::Node> &scalarNode(Type::Kind K,
                                                           unsigned Bits) {
  auto make = [](Type::Kind K, unsigned Bits, uint64_t Size, uint64_t Align) {
    auto N = std::make_shared<Type::Node>();
    N->K = K;
    N->Bits = Bits;
    N->Size = Size;
    N->Align = Align;
    return N;
  };
  static const std::shared_ptr<const Type::Node> I1 =
      make(Type::Kind::Int, 1, 1, 1);
  static const std::shared_ptr<const Type::Node> I8 =
      make(Type::Kind::Int, 8, 1, 1);
  static const std::shared_ptr<const Type::Node> I16 =
      make(Type::Kind::Int, 16, 2, 2);
  static const std::shared_ptr<const Type::Node> I32 =
      make(Type::Kind::Int, 32, 4, 4);
  static const std::shared_ptr<const Type::Node> I64 =
      make(Type::Kind::Int, 64, 8, 8);
  static const std::shared_ptr<const Type::Node> F32 =
      make(Type::Kind::Float, 32, 4, 4);
  static const std::shared_ptr<const Type::Node> F64 =
      make(Type::Kind::Float, 64, 8, 8);
  static const std::shared_ptr<const Type::Node> Ptr =
      make(Type::Kind::Ptr, 0, 8, 8);
  if (K == Type::Kind::Ptr)
    return Ptr;
  if (K == Type::Kind::Float)
    return Bits == 32 ? F32 : F64;
  switch (Bits) {
  case 1:
    return I1;
  case 8:
    return I8;
  case 16:
    return I16;
  case 32:
    return I32;
  default:
    return I64;
  }
}

Type Type::intTy(unsigned Bits) {
  assert(Bits == 1 || Bits == 8 || Bits == 16 || Bits == 32 || Bits == 64);
  return Type(scalarNode(Kind::Int, Bits));
}

Type Type::floatTy(unsigned Bits) {
  assert(Bits == 32 || Bits == 64);
  return Type(scalarNode(Kind::Float, Bits));
}

Type Type::ptrTy() { return Type(scalarNode(Kind::Ptr, 0)); }

Type Type::arrayTy(Type Elem, uint64_t Count) {
  auto N = std::make_shared<Node>();
  N->K = Kind::Array;
  N->Count = Count;
  N->Elem = Elem.N;
  N->Size = Elem.size() * Count;
  N->Align = Elem.align();
  return Type(std::move(N));
}

Type Type::structTy(std::vector<Type> Fields) {
  auto N = std::make_shared<Node>();
  N->K = Kind::Struct;
  uint64_t Off = 0;
  uint64_t MaxAlign = 1;
  for (const Type &F : Fields) {
    Off = alignUp(Off, F.align());
    N->Offsets.push_back(Off);
    Off += F.size();
    MaxAlign = std::max(MaxAlign, F.align());
  }
  N->Size = alignUp(Off, MaxAlign);
  N->Align = MaxAlign;
  N->Fields = std::move(Fields);
  return Type(std::move(N));
}

Type::Kind Type::kind() const { return N->K; }
unsigned Type::bits() const { return N->Bits; }
Type Type::elem() const {
  assert(N->K == Kind::Array);
  return Type(N->Elem);
}
uint64_t Type::count() const { return N->Count; }
const std::vector<Type> &Type::fields() const { return N->Fields; }
uint64_t Type::fieldOffset(unsigned Idx) const {
  assert(N->K == Kind::Struct && Idx < N->Offsets.size());
  return N->Offsets[Idx];
}
uint64_t Type::size() const { return N->Size; }
uint64_t Type::align() const { return N->Align; }

bool Type::operator==(const Type &O) const {
  if (N == O.N)
    return true;
  if (N->K != O.N->K)
    return false;
  switch (N->K) {
  case Kind::Int:
  case Kind::Float:
    return N->Bits == O.N->Bits;
  case Kind::Ptr:
    return true;
  case Kind::Array:
    return N->Count == O.N->Count && Type(N->Elem) == Type(O.N->Elem);
  case Kind::Struct:
    return N->Fields == O.N->Fields;
  }
  return false;
}

std::string Type::str() const {
  switch (N->K) {
  case Kind::Int:
    return "i" + std::to_string(N->Bits);
  case Kind::Float:
    return "f" + std::to_string(N->Bits);
  case Kind::Ptr:
    return "ptr";
  case Kind::Array:
    return "[" + std::to_string(N->Count) + " x " + Type(N->Elem).str() + "]";
  case Kind::Struct: {
    std::string S = "{";
    for (size_t I = 0; I < N->Fields.size(); ++I) {
      if (I)
        S += ", ";
      S += N->Fields[I].str();
    }
    S += "}";
    return S;
  }
  }
  return "?";
}

static void decomposeInto(const Type &Ty, uint64_t Off,
                          std::vector<PrimAccess> &Out) {
  switch (Ty.kind()) {
  case Type::Kind::Int:
  case Type::Kind::Float:
  case Type::Kind::Ptr:
    Out.push_back({Off, Ty});
    return;
  case Type::Kind::Array: {
    uint64_t ElemSize = Ty.elem().size();
    Type Elem = Ty.elem();
    for (uint64_t I = 0; I < Ty.count(); ++I)
      decomposeInto(Elem, Off + I * ElemSize, Out);
    return;
  }
  case Type::Kind::Struct: {
    const auto &Fields = Ty.fields();
    for (unsigned I = 0; I < Fields.size(); ++I)
      decomposeInto(Fields[I], Off + Ty.fieldOffset(I), Out);
    return;
  }
  }
}

std::vector<PrimAccess> decomposeAggregate(const Type &Ty,
                                           uint64_t ByteOffset) {
  if (Ty.isPrimitive())
    throw std::invalid_argument("decomposeAggregate: type is already primitive");
  std::vector<PrimAccess> Out;
  decomposeInto(Ty, ByteOffset, Out);
  return Out;
}

bool Signature::operator==(const Signature &O) const {
  if (Params.size() != O.Params.size())
    return false;
  for (size_t I = 0; I < Params.size(); ++I)
    if (Params[I] != O.Params[I])
      return false;
  if (RetTy.has_value() != O.RetTy.has_value())
    return false;
  return !RetTy || *RetTy == *O.RetTy;
}

std::string Signature::str() const {
  std::string S = "(";
  for (size_t I = 0; I < Params.size(); ++I) {
    if (I)
      S += ", ";
    S += Params[I].str();
  }
  S += ") -> ";
  S += RetTy ? RetTy->str() : "void";
  return S;
}

Signature signatureOf(const Function &F) {
  Signature S;
  for (uint32_t I = 0; I < F.NumParams; ++I)
    S.Params.push_back(F.Regs[I].Ty);
  S.RetTy = F.RetTy;
  return S;
}

Signature signatureOf(const ExternalDecl &E) { return {E.Params, E.RetTy}; }

int Module::findFunction(std::string_view Name) const {
  for (size_t I = 0; I < Functions.size(); ++I)
    if (Functions[I].Name == Name)
      return static_cast<int>(I);
  return -1;
}

int Module::findExternal(std::string_view Name) const {
  for (size_t I = 0; I < Externals.size(); ++I)
    if (Externals[I].Name == Name)
      return static_cast<int>(I);
  return -1;
}

int Module::findGlobal(std::string_view Name) const {
  for (size_t I = 0; I < Globals.size(); ++I)
    if (Globals[I].Name == Name)
      return static_cast<int>(I);
  return -1;
}

const char *icmpPredName(ICmpPred P) {
  switch (P) {
  case ICmpPred::Eq:
    return "eq";
  case ICmpPred::Ne:
    return "ne";
  case ICmpPred::Ult:
    return "ult";
  case ICmpPred::Ule:
    return "ule";
  case ICmpPred::Ugt:
    return "ugt";
  case ICmpPred::Uge:
    return "uge";
  case ICmpPred::Slt:
    return "slt";
  case ICmpPred::Sle:
    return "sle";
  case ICmpPred::Sgt:
    return "sgt";
  case ICmpPred::Sge:
    return "sge";
  }
  return "?";
}

const char *fcmpPredName(FCmpPred P) {
  switch (P) {
  case FCmpPred::Oeq:
    return "oeq";
  case FCmpPred::One:
    return "one";
  case FCmpPred::Olt:
    return "olt";
  case FCmpPred::Ole:
    return "ole";
  case FCmpPred::Ogt:
    return "ogt";
  case FCmpPred::Oge:
    return "oge";
  }
  return "?";
}

const char *castKindName(CastKind K) {
  switch (K) {
  case CastKind::Trunc:
    return "trunc";
  case CastKind::ZExt:
    return "zext";
  case CastKind::SExt:
    return "sext";
  case CastKind::FPTrunc:
    return "fptrunc";
  case CastKind::FPExt:
    return "fpext";
  case CastKind::SIToFP:
    return "sitofp";
  case CastKind::UIToFP:
    return "uitofp";
  case CastKind::FPToSI:
    return "fptosi";
  case CastKind::FPToUI:
    return "fptoui";
  case CastKind::Bitcast:
    return "bitcast";
  case CastKind::PtrToInt:
    return "ptrtoint";
  case CastKind::IntToPtr:
    return "inttoptr";
  }
  return "?";
}

} // namespace igen
