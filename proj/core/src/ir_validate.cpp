#include "igen/ir.hpp"

#include <unordered_set>

namespace igen {
namespace {

bool zeroArrayOnlyAsTail(const Type &Ty, bool TailPosition) {
  switch (Ty.kind()) {
  case Type::Kind::Int:
  case Type::Kind::Float:
  case Type::Kind::Ptr:
    return true;
  case Type::Kind::Array:
    if (Ty.count() == 0 && !TailPosition)
      return false;
    return zeroArrayOnlyAsTail(Ty.elem(), false);
  case Type::Kind::Struct: {
    const auto &Fs = Ty.fields();
    for (size_t I = 0; I < Fs.size(); ++I)
      if (!zeroArrayOnlyAsTail(Fs[I], TailPosition && I + 1 == Fs.size()))
        return false;
    return true;
  }
  }
  return true;
}

struct Validator {
  const Module &M;
  std::vector<std::string> Diags;

  void diag(std::string S) { Diags.push_back(std::move(S)); }

  void checkTypeShape(const Type &Ty, const std::string &Where) {
    if (!zeroArrayOnlyAsTail(Ty, true))
      diag(Where + ": zero-length array outside struct tail position");
  }

  std::optional<Type> operandType(const Function &F, const Operand &O) {
    if (O.isReg())
      return F.Regs[O.Reg].Ty;
    return std::nullopt; // immediates adopt the context type
  }

  bool operandMatches(const Function &F, const Operand &O, const Type &Want) {
    if (O.isReg())
      return F.Regs[O.Reg].Ty == Want;
    if (O.K == Operand::Kind::ImmNull)
      return Want.isPtr();
    if (O.K == Operand::Kind::ImmFloat)
      return Want.isFloat();
    return Want.isInt();
  }

  void checkCall(const Function &F, const Instr &I, const std::string &At) {
    auto CC = classifyCallee(M, I.Callee);
    if (!CC) {
      diag("unresolved callee @" + I.Callee);
      return;
    }
    Signature Sig;
    switch (CC->K) {
    case CalleeClass::Kind::Defined:
      Sig = signatureOf(M.Functions[CC->FuncIdx]);
      break;
    case CalleeClass::Kind::Intrinsic:
      Sig = intrinsicSignature(CC->Intrin);
      break;
    case CalleeClass::Kind::StubbedExternal:
      Sig = signatureOf(M.Externals[CC->ExternIdx]);
      break;
    case CalleeClass::Kind::NonReturningExternal:
      if (CC->HasIntrin)
        Sig = intrinsicSignature(CC->Intrin);
      else
        Sig = signatureOf(M.Externals[CC->ExternIdx]);
      break;
    }
    if (I.Ops.size() != Sig.Params.size()) {
      diag(At + ": call to @" + I.Callee + " expects " +
           std::to_string(Sig.Params.size()) + " argument(s), got " +
           std::to_string(I.Ops.size()));
      return;
    }
    for (size_t A = 0; A < I.Ops.size(); ++A)
      if (!operandMatches(F, I.Ops[A], Sig.Params[A]))
        diag(At + ": call to @" + I.Callee + " argument " +
             std::to_string(A) + " type mismatch");
    if (I.Result >= 0) {
      if (!Sig.RetTy)
        diag(At + ": call to void @" + I.Callee + " cannot have a result");
      else if (F.Regs[I.Result].Ty != *Sig.RetTy)
        diag(At + ": call result register type differs from @" + I.Callee +
             " return type");
    }
  }

  void checkCast(const Function &F, const Instr &I, const std::string &At) {
    std::optional<Type> Src = operandType(F, I.Ops[0]);
    const Type &Dst = I.Ty;
    auto bad = [&] { diag(At + ": invalid cast"); };
    switch (I.CK) {
    case CastKind::Trunc:
      if (!Dst.isInt() || (Src && (!Src->isInt() || Src->bits() <= Dst.bits())))
        bad();
      break;
    case CastKind::ZExt:
    case CastKind::SExt:
      if (!Dst.isInt() || (Src && (!Src->isInt() || Src->bits() >= Dst.bits())))
        bad();
      break;
    case CastKind::FPTrunc:
      if (!(Dst.isFloat() && Dst.bits() == 32) ||
          (Src && !(Src->isFloat() && Src->bits() == 64)))
        bad();
      break;
    case CastKind::FPExt:
      if (!(Dst.isFloat() && Dst.bits() == 64) ||
          (Src && !(Src->isFloat() && Src->bits() == 32)))
        bad();
      break;
    case CastKind::SIToFP:
    case CastKind::UIToFP:
      if (!Dst.isFloat() || (Src && !Src->isInt()))
        bad();
      break;
    case CastKind::FPToSI:
    case CastKind::FPToUI:
      if (!Dst.isInt() || (Src && !Src->isFloat()))
        bad();
      break;
    case CastKind::Bitcast:
      if (Src && Src->size() != Dst.size())
        bad();
      if (Dst.isAggregate() || (Src && Src->isAggregate()))
        bad();
      break;
    case CastKind::PtrToInt:
      if (!(Dst.isInt() && Dst.bits() == 64) || (Src && !Src->isPtr()))
        bad();
      break;
    case CastKind::IntToPtr:
      if (!Dst.isPtr() || (Src && !(Src->isInt() && Src->bits() == 64)))
        bad();
      break;
    }
  }

  void checkInstr(const Function &F, const Block &B, const Instr &I) {
    std::string At = "@" + F.Name + ":%" + B.Label;
    switch (I.Op) {
    case Opcode::Const:
      if (!I.Ty.isPrimitive())
        diag(At + ": const requires a primitive type");
      break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::SDiv:
    case Opcode::UDiv:
      if (!I.Ty.isInt())
        diag(At + ": integer arithmetic on non-integer type");
      for (const Operand &O : I.Ops)
        if (!operandMatches(F, O, I.Ty))
          diag(At + ": arithmetic operand type mismatch");
      break;
    case Opcode::FAdd:
    case Opcode::FSub:
    case Opcode::FMul:
    case Opcode::FDiv:
      if (!I.Ty.isFloat())
        diag(At + ": float arithmetic on non-float type");
      for (const Operand &O : I.Ops)
        if (!operandMatches(F, O, I.Ty))
          diag(At + ": arithmetic operand type mismatch");
      break;
    case Opcode::ICmp: {
      std::optional<Type> Ty = operandType(F, I.Ops[0]);
      if (!Ty)
        Ty = operandType(F, I.Ops[1]);
      if (Ty && !(Ty->isInt() || Ty->isPtr()))
        diag(At + ": icmp requires integer or pointer operands");
      if (Ty)
        for (const Operand &O : I.Ops)
          if (!operandMatches(F, O, *Ty))
            diag(At + ": icmp operand type mismatch");
      break;
    }
    case Opcode::FCmp: {
      std::optional<Type> Ty = operandType(F, I.Ops[0]);
      if (!Ty)
        Ty = operandType(F, I.Ops[1]);
      if (Ty && !Ty->isFloat())
        diag(At + ": fcmp requires float operands");
      break;
    }
    case Opcode::Gep:
      if (!operandMatches(F, I.Ops[0], Type::ptrTy()))
        diag(At + ": gep base must be a pointer");
      for (const auto &[Scale, Reg] : I.GepScaled)
        if (!F.Regs[Reg].Ty.isInt())
          diag(At + ": gep index %" + F.Regs[Reg].Name + " must be integer");
      break;
    case Opcode::Load:
      if (I.Ty.size() == 0)
        diag(At + ": load of zero-sized type");
      checkTypeShape(I.Ty, At);
      if (!operandMatches(F, I.Ops[0], Type::ptrTy()))
        diag(At + ": load address must be a pointer");
      break;
    case Opcode::Store:
      if (I.Ty.size() == 0)
        diag(At + ": store of zero-sized type");
      checkTypeShape(I.Ty, At);
      if (!operandMatches(F, I.Ops[0], I.Ty))
        diag(At + ": stored value type mismatch");
      if (!operandMatches(F, I.Ops[1], Type::ptrTy()))
        diag(At + ": store address must be a pointer");
      break;
    case Opcode::Call:
      checkCall(F, I, At);
      break;
    case Opcode::ICall:
      if (!operandMatches(F, I.Ops[0], Type::ptrTy()))
        diag(At + ": icall callee must be a pointer");
      if (I.HasTy && !I.Ty.isPrimitive())
        diag(At + ": icall result must be primitive");
      for (size_t A = 1; A < I.Ops.size(); ++A) {
        if (!I.Ops[A].isReg()) {
          diag(At + ": icall arguments must be registers");
          continue;
        }
        if (F.Regs[I.Ops[A].Reg].Ty.isAggregate())
          diag(At + ": icall arguments must be primitive");
      }
      break;
    case Opcode::Select: {
      if (!operandMatches(F, I.Ops[0], Type::intTy(1)))
        diag(At + ": select condition must be i1");
      if (I.Result >= 0) {
        const Type &RTy = F.Regs[I.Result].Ty;
        if (RTy.isAggregate())
          diag(At + ": select on aggregate type");
        for (size_t A = 1; A < I.Ops.size(); ++A)
          if (!operandMatches(F, I.Ops[A], RTy))
            diag(At + ": select operand type mismatch");
      }
      break;
    }
    case Opcode::Cast:
      checkCast(F, I, At);
      break;
    case Opcode::Alloca:
      if (I.Ty.size() == 0)
        diag(At + ": alloca of zero-sized type");
      checkTypeShape(I.Ty, At);
      break;
    case Opcode::Br:
      if (!operandMatches(F, I.Ops[0], Type::intTy(1)))
        diag(At + ": branch condition must be i1");
      break;
    case Opcode::Jmp:
    case Opcode::Unreachable:
      break;
    case Opcode::Ret:
      if (F.RetTy && !I.Ops.empty()) {
        if (!operandMatches(F, I.Ops[0], *F.RetTy))
          diag(At + ": return value type mismatch");
      } else if (F.RetTy && I.Ops.empty()) {
        diag(At + ": missing return value");
      }
      break;
    }
  }

  void checkFunction(const Function &F) {
    if (F.Blocks.empty()) {
      diag("@" + F.Name + ": function has no entry block");
      return;
    }
    for (uint32_t P = 0; P < F.NumParams; ++P)
      if (F.Regs[P].Ty.isAggregate())
        diag("@" + F.Name + ": parameter %" + F.Regs[P].Name +
             " has aggregate type");
    if (F.RetTy && F.RetTy->isAggregate())
      diag("@" + F.Name + ": aggregate return type");

    for (const Block &B : F.Blocks) {
      if (B.Instrs.empty()) {
        diag("block %" + B.Label + " lacks terminator");
        continue;
      }
      for (size_t I = 0; I + 1 < B.Instrs.size(); ++I)
        if (B.Instrs[I].isTerminator())
          diag("block %" + B.Label + " has instructions after terminator");
      if (!B.Instrs.back().isTerminator())
        diag("block %" + B.Label + " lacks terminator");
      for (const Instr &I : B.Instrs)
        checkInstr(F, B, I);
    }
  }

  void run() {
    std::unordered_set<std::string> Names;
    auto checkName = [&](const std::string &N) {
      if (!Names.insert(N).second)
        diag("duplicate name @" + N);
    };
    for (const GlobalVar &G : M.Globals) {
      checkName(G.Name);
      checkTypeShape(G.Ty, "global @" + G.Name);
      if (G.Ty.size() == 0)
        diag("global @" + G.Name + " has zero-sized type");
      if (G.HasInit && G.Init.size() != G.Ty.size())
        diag("global @" + G.Name + " initializer size mismatch");
    }
    static const char *IntrinNames[] = {"malloc", "free",  "memcpy",
                                        "memset", "exit",  "abort"};
    for (const Function &F : M.Functions) {
      checkName(F.Name);
      for (const char *IN : IntrinNames)
        if (F.Name == IN)
          diag("function name @" + F.Name + " collides with an intrinsic");
    }
    for (const ExternalDecl &E : M.Externals) {
      checkName(E.Name);
      if (auto CC = classifyCallee(M, E.Name);
          CC && CC->HasIntrin && !(signatureOf(E) == intrinsicSignature(CC->Intrin)))
        diag("declaration of @" + E.Name +
             " does not match the intrinsic signature");
      if (E.NoReturn && E.RetTy)
        diag("noreturn external @" + E.Name + " must return void");
      for (const Type &P : E.Params)
        if (P.isAggregate())
          diag("external @" + E.Name + " has aggregate parameter");
      if (E.RetTy && E.RetTy->isAggregate())
        diag("external @" + E.Name + " has aggregate return type");
    }
    for (const Function &F : M.Functions)
      checkFunction(F);
  }
};

} // namespace

std::vector<std::string> validateModule(const Module &M) {
  Validator V{M, {}};
  V.run();
  return V.Diags;
}

} // namespace igen
