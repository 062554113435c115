#include "igen/ir.hpp"

#include <cassert>

namespace igen {

Signature intrinsicSignature(IntrinsicKind K) {
  Type I32 = Type::intTy(32);
  Type I64 = Type::intTy(64);
  Type Ptr = Type::ptrTy();
  switch (K) {
  case IntrinsicKind::Malloc:
    return {{I64}, Ptr};
  case IntrinsicKind::Free:
    return {{Ptr}, std::nullopt};
  case IntrinsicKind::Memcpy:
    return {{Ptr, Ptr, I64}, Ptr};
  case IntrinsicKind::Memset:
    return {{Ptr, I32, I64}, Ptr};
  case IntrinsicKind::Exit:
    return {{I32}, std::nullopt};
  case IntrinsicKind::Abort:
    return {{}, std::nullopt};
  }
  return {};
}

std::optional<CalleeClass> classifyCallee(const Module &M,
                                          std::string_view Name) {
  if (int FI = M.findFunction(Name); FI >= 0) {
    CalleeClass C;
    C.K = CalleeClass::Kind::Defined;
    C.FuncIdx = FI;
    return C;
  }
  // exit and abort terminate the run; the other allow-listed functions are
  // executed natively.
  static const std::pair<const char *, IntrinsicKind> AllowList[] = {
      {"malloc", IntrinsicKind::Malloc}, {"free", IntrinsicKind::Free},
      {"memcpy", IntrinsicKind::Memcpy}, {"memset", IntrinsicKind::Memset},
      {"exit", IntrinsicKind::Exit},     {"abort", IntrinsicKind::Abort}};
  for (auto &[IName, IK] : AllowList) {
    if (Name == IName) {
      CalleeClass C;
      C.HasIntrin = true;
      C.Intrin = IK;
      C.K = (IK == IntrinsicKind::Exit || IK == IntrinsicKind::Abort)
                ? CalleeClass::Kind::NonReturningExternal
                : CalleeClass::Kind::Intrinsic;
      C.ExternIdx = M.findExternal(Name);
      return C;
    }
  }
  if (int EI = M.findExternal(Name); EI >= 0) {
    CalleeClass C;
    C.ExternIdx = EI;
    C.K = M.Externals[EI].NoReturn
              ? CalleeClass::Kind::NonReturningExternal
              : CalleeClass::Kind::StubbedExternal;
    return C;
  }
  return std::nullopt;
}

CallGraph CallGraph::build(const Module &M) {
  size_t N = M.Functions.size();
  CallGraph CG;
  CG.Reach.assign(N, std::vector<bool>(N, false));

  // Direct edges, plus conservative edges from every indirect call site to
  // all signature-compatible defined functions.
  std::vector<std::vector<uint32_t>> Succ(N);
  for (uint32_t F = 0; F < N; ++F) {
    for (const Block &B : M.Functions[F].Blocks) {
      for (const Instr &I : B.Instrs) {
        if (I.Op == Opcode::Call) {
          if (int FI = M.findFunction(I.Callee); FI >= 0)
            Succ[F].push_back(static_cast<uint32_t>(FI));
        } else if (I.Op == Opcode::ICall) {
          Signature Sig;
          for (size_t A = 1; A < I.Ops.size(); ++A) {
            const Operand &O = I.Ops[A];
            Sig.Params.push_back(O.isReg() ? M.Functions[F].Regs[O.Reg].Ty
                                           : Type::intTy(64));
          }
          if (I.HasTy)
            Sig.RetTy = I.Ty;
          for (uint32_t G = 0; G < N; ++G)
            if (signatureOf(M.Functions[G]) == Sig)
              Succ[F].push_back(G);
        }
      }
    }
  }

  // Reflexive-transitive closure via DFS per root; corpora are small.
  for (uint32_t Root = 0; Root < N; ++Root) {
    std::vector<uint32_t> Stack{Root};
    CG.Reach[Root][Root] = true;
    while (!Stack.empty()) {
      uint32_t F = Stack.back();
      Stack.pop_back();
      for (uint32_t S : Succ[F]) {
        if (!CG.Reach[Root][S]) {
          CG.Reach[Root][S] = true;
          Stack.push_back(S);
        }
      }
    }
  }
  return CG;
}

bool CallGraph::reaches(uint32_t From, uint32_t To) const {
  assert(From < Reach.size() && To < Reach.size());
  return Reach[From][To];
}

std::vector<int32_t> indirectCandidates(const Module &M, uint32_t CallerIdx,
                                        const Signature &Sig,
                                        const CallGraph &CG) {
  std::vector<int32_t> Out;
  for (uint32_t F = 0; F < M.Functions.size(); ++F) {
    if (!(signatureOf(M.Functions[F]) == Sig))
      continue;
    // Calling anything that can reach the caller could recurse forever.
    if (CG.reaches(F, CallerIdx))
      continue;
    Out.push_back(static_cast<int32_t>(F));
  }
  Out.push_back(StubCallee);
  return Out;
}

namespace {

// Most recent definition of Reg in B strictly before position Pos, or -1.
int lastDefBefore(const Block &B, int32_t Reg, size_t Pos) {
  for (size_t I = Pos; I-- > 0;)
    if (B.Instrs[I].Result == Reg)
      return static_cast<int>(I);
  return -1;
}

// A load qualifies as a generated-value site unless its address register
// is only ever defined by allocas (definitely user-managed memory).
bool loadMayReadManaged(const Function &F, const Instr &Load) {
  if (!Load.Ops[0].isReg())
    return false;
  int32_t Addr = Load.Ops[0].Reg;
  if (Addr < static_cast<int32_t>(F.NumParams))
    return true;
  bool SawDef = false;
  for (const Block &B : F.Blocks)
    for (const Instr &I : B.Instrs)
      if (I.Result == Addr) {
        SawDef = true;
        if (I.Op != Opcode::Alloca)
          return true;
      }
  return !SawDef;
}

} // namespace

std::vector<BranchHint> extractBranchHints(const Module &M,
                                           const Function &F) {
  std::vector<BranchHint> Hints;
  for (uint32_t BI = 0; BI < F.Blocks.size(); ++BI) {
    const Block &B = F.Blocks[BI];
    if (B.Instrs.empty())
      continue;
    const Instr &Term = B.Instrs.back();
    if (Term.Op != Opcode::Br || !Term.Ops[0].isReg())
      continue;
    size_t TermPos = B.Instrs.size() - 1;

    int CmpPos = lastDefBefore(B, Term.Ops[0].Reg, TermPos);
    if (CmpPos < 0)
      continue;
    const Instr &Cmp = B.Instrs[CmpPos];
    if (Cmp.Op != Opcode::ICmp && Cmp.Op != Opcode::FCmp)
      continue;

    // One side must be a constant: an immediate, or a register whose last
    // in-block definition before the comparison is a const.
    auto constBits = [&](const Operand &O) -> std::optional<uint64_t> {
      if (O.K == Operand::Kind::ImmInt || O.K == Operand::Kind::ImmFloat)
        return O.Bits;
      if (!O.isReg())
        return std::nullopt;
      int D = lastDefBefore(B, O.Reg, static_cast<size_t>(CmpPos));
      if (D >= 0 && B.Instrs[D].Op == Opcode::Const &&
          B.Instrs[D].Ops[0].K != Operand::Kind::ImmNull)
        return B.Instrs[D].Ops[0].Bits;
      return std::nullopt;
    };

    // The other side must be a register whose last in-block definition is
    // a load of managed memory or a stubbed-external return.
    auto valueSite = [&](const Operand &O) -> std::optional<uint32_t> {
      if (!O.isReg())
        return std::nullopt;
      int D = lastDefBefore(B, O.Reg, static_cast<size_t>(CmpPos));
      if (D < 0)
        return std::nullopt;
      const Instr &Def = B.Instrs[D];
      if (Def.Op == Opcode::Load && Def.Ty.isPrimitive() &&
          !Def.Ty.isPtr() && loadMayReadManaged(F, Def))
        return static_cast<uint32_t>(D);
      if (Def.Op == Opcode::Call) {
        auto CC = classifyCallee(M, Def.Callee);
        if (CC && CC->K == CalleeClass::Kind::StubbedExternal &&
            Def.Result >= 0 && !F.Regs[Def.Result].Ty.isPtr())
          return static_cast<uint32_t>(D);
      }
      return std::nullopt;
    };

    for (int Side = 0; Side < 2; ++Side) {
      auto Value = valueSite(Cmp.Ops[Side]);
      auto Const = constBits(Cmp.Ops[1 - Side]);
      if (!Value || !Const)
        continue;
      BranchHint H;
      H.Block = BI;
      H.ValueInstr = *Value;
      H.BranchInstr = static_cast<uint32_t>(TermPos);
      H.IsFloat = Cmp.Op == Opcode::FCmp;
      H.Pred = Cmp.Pred;
      H.ConstBits = *Const;
      H.ValueTy = F.Regs[Cmp.Ops[Side].Reg].Ty;
      H.ValueOnLhs = Side == 0;
      Hints.push_back(H);
      break;
    }
  }
  return Hints;
}

} // namespace igen
