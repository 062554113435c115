#include "igen/ir.hpp"

#include <charconv>
#include <cstring>
#include <string>

namespace igen {
namespace {

uint64_t signExtend(uint64_t Bits, unsigned W) {
  if (W >= 64)
    return Bits;
  uint64_t M = uint64_t(1) << (W - 1);
  Bits &= (uint64_t(1) << W) - 1;
  return (Bits ^ M) - M;
}

std::string formatFloatBits(uint64_t Bits, unsigned W) {
  char Buf[64];
  std::to_chars_result R;
  if (W == 32) {
    float F;
    uint32_t B32 = static_cast<uint32_t>(Bits);
    memcpy(&F, &B32, 4);
    R = std::to_chars(Buf, Buf + sizeof(Buf), F);
  } else {
    double D;
    memcpy(&D, &Bits, 8);
    R = std::to_chars(Buf, Buf + sizeof(Buf), D);
  }
  return std::string(Buf, R.ptr);
}

class Printer {
public:
  Printer(const Module &M) : M(M) {}

  std::string run() {
    for (const GlobalVar &G : M.Globals)
      printGlobal(G);
    for (const ExternalDecl &E : M.Externals)
      printExternal(E);
    for (const Function &F : M.Functions)
      printFunction(F);
    return std::move(Out);
  }

private:
  const Module &M;
  std::string Out;

  void printGlobal(const GlobalVar &G) {
    Out += "global @" + G.Name + " : " + G.Ty.str();
    if (G.HasInit) {
      Out += " = ";
      bool AllZero = true;
      for (uint8_t B : G.Init)
        AllZero &= B == 0;
      if (AllZero && G.Ty.isAggregate())
        Out += "zeroinit";
      else
        printInit(G.Ty, G.Init.data());
    }
    Out += "\n";
  }

  void printInit(const Type &Ty, const uint8_t *Data) {
    switch (Ty.kind()) {
    case Type::Kind::Int: {
      uint64_t V = 0;
      memcpy(&V, Data, Ty.size());
      Out += std::to_string(
          static_cast<int64_t>(signExtend(V, Ty.bits())));
      return;
    }
    case Type::Kind::Float: {
      uint64_t Bits = 0;
      memcpy(&Bits, Data, Ty.size());
      Out += formatFloatBits(Bits, Ty.bits());
      return;
    }
    case Type::Kind::Ptr:
      Out += "null";
      return;
    case Type::Kind::Array: {
      Out += "[";
      Type Elem = Ty.elem();
      for (uint64_t I = 0; I < Ty.count(); ++I) {
        if (I)
          Out += ", ";
        printInit(Elem, Data + I * Elem.size());
      }
      Out += "]";
      return;
    }
    case Type::Kind::Struct: {
      Out += "{";
      const auto &Fields = Ty.fields();
      for (unsigned I = 0; I < Fields.size(); ++I) {
        if (I)
          Out += ", ";
        printInit(Fields[I], Data + Ty.fieldOffset(I));
      }
      Out += "}";
      return;
    }
    }
  }

  void printExternal(const ExternalDecl &E) {
    Out += "declare @" + E.Name + "(";
    for (size_t I = 0; I < E.Params.size(); ++I) {
      if (I)
        Out += ", ";
      Out += E.Params[I].str();
    }
    Out += ") -> ";
    Out += E.RetTy ? E.RetTy->str() : "void";
    if (E.NoReturn)
      Out += " noreturn";
    Out += "\n";
  }

  void printFunction(const Function &F) {
    Out += "func @" + F.Name + "(";
    for (uint32_t I = 0; I < F.NumParams; ++I) {
      if (I)
        Out += ", ";
      Out += "%" + F.Regs[I].Name + ": " + F.Regs[I].Ty.str();
    }
    Out += ") -> ";
    Out += F.RetTy ? F.RetTy->str() : "void";
    Out += " {\n";
    for (const Block &B : F.Blocks) {
      Out += B.Label + ":\n";
      for (const Instr &I : B.Instrs)
        printInstr(F, I);
    }
    Out += "}\n";
  }

  std::string operandStr(const Function &F, const Operand &O,
                         std::optional<Type> Ctx) {
    switch (O.K) {
    case Operand::Kind::Reg:
      return "%" + F.Regs[O.Reg].Name;
    case Operand::Kind::ImmNull:
      return "null";
    case Operand::Kind::ImmFloat: {
      unsigned W = Ctx && Ctx->isFloat() ? Ctx->bits() : 64;
      return formatFloatBits(O.Bits, W);
    }
    case Operand::Kind::ImmInt: {
      unsigned W = Ctx && Ctx->isInt() ? Ctx->bits() : 64;
      return std::to_string(static_cast<int64_t>(signExtend(O.Bits, W)));
    }
    }
    return "?";
  }

  std::optional<Type> cmpOperandType(const Function &F, const Instr &I) {
    for (const Operand &O : I.Ops)
      if (O.isReg())
        return F.Regs[O.Reg].Ty;
    return std::nullopt;
  }

  void printInstr(const Function &F, const Instr &I) {
    Out += "  ";
    if (I.Result >= 0)
      Out += "%" + F.Regs[I.Result].Name + " = ";
    switch (I.Op) {
    case Opcode::Const:
      Out += "const " + I.Ty.str() + " " + operandStr(F, I.Ops[0], I.Ty);
      break;
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::SDiv:
    case Opcode::UDiv:
    case Opcode::FAdd:
    case Opcode::FSub:
    case Opcode::FMul:
    case Opcode::FDiv: {
      static const char *Names[] = {"",     "add",  "sub",  "mul", "sdiv",
                                    "udiv", "fadd", "fsub", "fmul", "fdiv"};
      Out += std::string(Names[static_cast<int>(I.Op)]) + " " + I.Ty.str() +
             " " + operandStr(F, I.Ops[0], I.Ty) + ", " +
             operandStr(F, I.Ops[1], I.Ty);
      break;
    }
    case Opcode::ICmp: {
      auto Ctx = cmpOperandType(F, I);
      Out += std::string("icmp ") +
             icmpPredName(static_cast<ICmpPred>(I.Pred)) + " " +
             operandStr(F, I.Ops[0], Ctx) + ", " +
             operandStr(F, I.Ops[1], Ctx);
      break;
    }
    case Opcode::FCmp: {
      auto Ctx = cmpOperandType(F, I);
      Out += std::string("fcmp ") +
             fcmpPredName(static_cast<FCmpPred>(I.Pred)) + " " +
             operandStr(F, I.Ops[0], Ctx) + ", " +
             operandStr(F, I.Ops[1], Ctx);
      break;
    }
    case Opcode::Gep: {
      Out += "gep " + operandStr(F, I.Ops[0], std::nullopt) + ", ";
      bool First = true;
      if (I.GepConst != 0 || I.GepScaled.empty()) {
        Out += std::to_string(I.GepConst);
        First = false;
      }
      for (const auto &[Scale, Reg] : I.GepScaled) {
        if (!First)
          Out += " + ";
        First = false;
        if (Scale != 1)
          Out += std::to_string(Scale) + " * ";
        Out += "%" + F.Regs[Reg].Name;
      }
      break;
    }
    case Opcode::Load:
      Out += "load " + I.Ty.str() + ", " + operandStr(F, I.Ops[0], std::nullopt);
      break;
    case Opcode::Store:
      Out += "store " + I.Ty.str() + " " + operandStr(F, I.Ops[0], I.Ty) +
             ", " + operandStr(F, I.Ops[1], std::nullopt);
      break;
    case Opcode::Call: {
      Out += "call @" + I.Callee + "(";
      std::vector<Type> Params;
      if (int FI = M.findFunction(I.Callee); FI >= 0) {
        const Function &G = M.Functions[FI];
        for (uint32_t P = 0; P < G.NumParams; ++P)
          Params.push_back(G.Regs[P].Ty);
      } else if (int EI = M.findExternal(I.Callee); EI >= 0) {
        Params = M.Externals[EI].Params;
      } else if (auto CC = classifyCallee(M, I.Callee); CC && CC->HasIntrin) {
        Params = intrinsicSignature(CC->Intrin).Params;
      }
      for (size_t A = 0; A < I.Ops.size(); ++A) {
        if (A)
          Out += ", ";
        Out += operandStr(F, I.Ops[A],
                          A < Params.size() ? std::optional(Params[A])
                                            : std::nullopt);
      }
      Out += ")";
      break;
    }
    case Opcode::ICall: {
      Out += "icall ";
      Out += I.HasTy ? I.Ty.str() : "void";
      Out += " " + operandStr(F, I.Ops[0], std::nullopt) + "(";
      for (size_t A = 1; A < I.Ops.size(); ++A) {
        if (A > 1)
          Out += ", ";
        Out += operandStr(F, I.Ops[A], std::nullopt);
      }
      Out += ")";
      break;
    }
    case Opcode::Select: {
      std::optional<Type> Ctx =
          I.Result >= 0 ? std::optional(F.Regs[I.Result].Ty) : std::nullopt;
      Out += "select " + operandStr(F, I.Ops[0], Type::intTy(1)) + ", " +
             operandStr(F, I.Ops[1], Ctx) + ", " +
             operandStr(F, I.Ops[2], Ctx);
      break;
    }
    case Opcode::Cast:
      Out += std::string("cast ") + castKindName(I.CK) + " " + I.Ty.str() +
             ", " + operandStr(F, I.Ops[0], std::nullopt);
      break;
    case Opcode::Alloca:
      Out += "alloca " + I.Ty.str();
      break;
    case Opcode::Br:
      Out += "br " + operandStr(F, I.Ops[0], Type::intTy(1)) + ", " +
             F.Blocks[I.Succ0].Label + ", " + F.Blocks[I.Succ1].Label;
      break;
    case Opcode::Jmp:
      Out += "jmp " + F.Blocks[I.Succ0].Label;
      break;
    case Opcode::Ret:
      Out += "ret";
      if (!I.Ops.empty())
        Out += " " + operandStr(F, I.Ops[0], F.RetTy);
      break;
    case Opcode::Unreachable:
      Out += "unreachable";
      break;
    }
    Out += "\n";
  }
};

} // namespace

std::string printModule(const Module &M) { return Printer(M).run(); }

} // namespace igen
