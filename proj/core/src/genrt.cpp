#include "igen/genrt.hpp"
#include "igen/support.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>

namespace igen {

const char *streamTagName(StreamTag T) {
  switch (T) {
  case StreamTag::I1:
    return "i1";
  case StreamTag::I8:
    return "i8";
  case StreamTag::I16:
    return "i16";
  case StreamTag::I32:
    return "i32";
  case StreamTag::I64:
    return "i64";
  case StreamTag::F32:
    return "f32";
  case StreamTag::F64:
    return "f64";
  case StreamTag::Ptr:
    return "ptr";
  case StreamTag::Callee:
    return "callee";
  }
  return "?";
}

StreamTag tagForType(const Type &Ty) {
  if (Ty.isPtr())
    return StreamTag::Ptr;
  if (Ty.isFloat())
    return Ty.bits() == 32 ? StreamTag::F32 : StreamTag::F64;
  switch (Ty.bits()) {
  case 1:
    return StreamTag::I1;
  case 8:
    return StreamTag::I8;
  case 16:
    return StreamTag::I16;
  case 32:
    return StreamTag::I32;
  default:
    return StreamTag::I64;
  }
}

GenRuntime::GenRuntime(MemoryPool &Pool, const GenConfig &Cfg,
                       const ConstraintSet &Constraints, uint64_t AttemptSeed)
    : Pool(Pool), Cfg(Cfg), Constraints(Constraints), Rng(AttemptSeed) {}

void GenRuntime::setActiveHint(const BranchHint *H, uint64_t Taken,
                               uint64_t NotTaken) {
  Hint = H;
  HintTaken = Taken;
  HintNotTaken = NotTaken;
}

static uint64_t maskW(uint64_t V, unsigned Bits) {
  return Bits >= 64 ? V : (V & ((uint64_t(1) << Bits) - 1));
}

static int64_t sext(uint64_t V, unsigned Bits) {
  if (Bits >= 64)
    return static_cast<int64_t>(V);
  uint64_t M = uint64_t(1) << (Bits - 1);
  V &= (uint64_t(1) << Bits) - 1;
  return static_cast<int64_t>((V ^ M) - M);
}

uint64_t GenRuntime::genDefaultInt(unsigned Bits) {
  uint64_t Span = static_cast<uint64_t>(Cfg.IntHi - Cfg.IntLo);
  uint64_t V = Span ? static_cast<uint64_t>(Cfg.IntLo) + nextU64() % Span
                    : static_cast<uint64_t>(Cfg.IntLo);
  return maskW(V, Bits);
}

uint64_t GenRuntime::genDefaultFloat(unsigned Bits) {
  double D = Cfg.FloatLo + unit() * (Cfg.FloatHi - Cfg.FloatLo);
  if (Bits == 32) {
    float F = static_cast<float>(D);
    uint32_t B;
    memcpy(&B, &F, 4);
    return B;
  }
  uint64_t B;
  memcpy(&B, &D, 8);
  return B;
}

namespace {

// Normalized relation of the generated value v against the constant k.
enum class Rel { Eq, Ne, Lt, Le, Gt, Ge };

Rel normalizeICmp(ICmpPred P, bool ValueOnLhs, bool &IsSigned) {
  IsSigned = P == ICmpPred::Slt || P == ICmpPred::Sle || P == ICmpPred::Sgt ||
             P == ICmpPred::Sge;
  Rel R;
  switch (P) {
  case ICmpPred::Eq:
    R = Rel::Eq;
    break;
  case ICmpPred::Ne:
    R = Rel::Ne;
    break;
  case ICmpPred::Ult:
  case ICmpPred::Slt:
    R = Rel::Lt;
    break;
  case ICmpPred::Ule:
  case ICmpPred::Sle:
    R = Rel::Le;
    break;
  case ICmpPred::Ugt:
  case ICmpPred::Sgt:
    R = Rel::Gt;
    break;
  case ICmpPred::Uge:
  case ICmpPred::Sge:
    R = Rel::Ge;
    break;
  }
  if (!ValueOnLhs) {
    switch (R) {
    case Rel::Lt:
      R = Rel::Gt;
      break;
    case Rel::Le:
      R = Rel::Ge;
      break;
    case Rel::Gt:
      R = Rel::Lt;
      break;
    case Rel::Ge:
      R = Rel::Le;
      break;
    default:
      break;
    }
  }
  return R;
}

Rel negateRel(Rel R) {
  switch (R) {
  case Rel::Eq:
    return Rel::Ne;
  case Rel::Ne:
    return Rel::Eq;
  case Rel::Lt:
    return Rel::Ge;
  case Rel::Le:
    return Rel::Gt;
  case Rel::Gt:
    return Rel::Le;
  case Rel::Ge:
    return Rel::Lt;
  }
  return Rel::Eq;
}

Rel normalizeFCmp(FCmpPred P, bool ValueOnLhs) {
  Rel R;
  switch (P) {
  case FCmpPred::Oeq:
    R = Rel::Eq;
    break;
  case FCmpPred::One:
    R = Rel::Ne;
    break;
  case FCmpPred::Olt:
    R = Rel::Lt;
    break;
  case FCmpPred::Ole:
    R = Rel::Le;
    break;
  case FCmpPred::Ogt:
    R = Rel::Gt;
    break;
  case FCmpPred::Oge:
    R = Rel::Ge;
    break;
  }
  if (!ValueOnLhs) {
    switch (R) {
    case Rel::Lt:
      R = Rel::Gt;
      break;
    case Rel::Le:
      R = Rel::Ge;
      break;
    case Rel::Gt:
      R = Rel::Lt;
      break;
    case Rel::Ge:
      R = Rel::Le;
      break;
    default:
      break;
    }
  }
  return R;
}

} // namespace

// Values near the constant keep loop bounds small while still landing on
// the requested side of the comparison.
static constexpr int64_t HintSpread = 16;

uint64_t GenRuntime::genHinted(const Type &Ty) {
  const BranchHint &H = *Hint;
  // lower-covered outcome wins; on a tie we satisfy the condition
  bool WantTrue = HintTaken <= HintNotTaken;

  if (Ty.isInt() && !H.IsFloat) {
    bool IsSigned = false;
    Rel R = normalizeICmp(static_cast<ICmpPred>(H.Pred), H.ValueOnLhs,
                          IsSigned);
    if (!WantTrue)
      R = negateRel(R);
    unsigned W = Ty.bits();
    int64_t K = IsSigned ? sext(H.ConstBits, W)
                         : static_cast<int64_t>(maskW(H.ConstBits, W));
    int64_t DomLo, DomHi;
    if (IsSigned && W < 64) {
      DomLo = -(int64_t(1) << (W - 1));
      DomHi = (int64_t(1) << (W - 1)) - 1;
    } else if (IsSigned) {
      DomLo = INT64_MIN;
      DomHi = INT64_MAX;
    } else {
      DomLo = 0;
      DomHi = W >= 64 ? INT64_MAX : (int64_t(1) << W) - 1;
    }
    int64_t Lo = DomLo, Hi = DomHi;
    switch (R) {
    case Rel::Eq:
      Lo = Hi = K;
      break;
    case Rel::Ne: {
      // adjacent values; fall back below if K sits on a domain edge
      if (K < DomHi) {
        Lo = K + 1;
        Hi = std::min(DomHi, K + HintSpread);
      } else if (K > DomLo) {
        Hi = K - 1;
        Lo = std::max(DomLo, K - HintSpread);
      } else {
        return genDefaultInt(W);
      }
      break;
    }
    case Rel::Lt:
      Hi = K - 1;
      Lo = std::max(DomLo, K - HintSpread);
      break;
    case Rel::Le:
      Hi = K;
      Lo = std::max(DomLo, K - HintSpread + 1);
      break;
    case Rel::Gt:
      Lo = K + 1;
      Hi = std::min(DomHi, K + HintSpread);
      break;
    case Rel::Ge:
      Lo = K;
      Hi = std::min(DomHi, K + HintSpread - 1);
      break;
    }
    if (Lo > Hi || Lo < DomLo || Hi > DomHi)
      return genDefaultInt(W);
    uint64_t Span = static_cast<uint64_t>(Hi - Lo) + 1;
    int64_t V = Lo + static_cast<int64_t>(Span ? nextU64() % Span : 0);
    return maskW(static_cast<uint64_t>(V), W);
  }

  if (Ty.isFloat() && H.IsFloat) {
    Rel R = normalizeFCmp(static_cast<FCmpPred>(H.Pred), H.ValueOnLhs);
    if (!WantTrue)
      R = negateRel(R);
    double K;
    if (Ty.bits() == 32) {
      float F;
      uint32_t B = static_cast<uint32_t>(H.ConstBits);
      memcpy(&F, &B, 4);
      K = F;
    } else {
      memcpy(&K, &H.ConstBits, 8);
    }
    double V;
    double Off = 0.5 + unit() * (HintSpread - 1);
    switch (R) {
    case Rel::Eq:
      V = K;
      break;
    case Rel::Ne:
    case Rel::Gt:
      V = K + Off;
      break;
    case Rel::Ge:
      V = K + Off - 0.5;
      break;
    case Rel::Lt:
      V = K - Off;
      break;
    case Rel::Le:
      V = K - Off + 0.5;
      break;
    default:
      V = K;
      break;
    }
    if (Ty.bits() == 32) {
      float F = static_cast<float>(V);
      uint32_t B;
      memcpy(&B, &F, 4);
      return B;
    }
    uint64_t B;
    memcpy(&B, &V, 8);
    return B;
  }

  // hint namespace does not match the requested type
  return Ty.isInt() ? genDefaultInt(Ty.bits()) : genDefaultFloat(Ty.bits());
}

uint64_t GenRuntime::genNumeric(const Type &Ty) {
  assert(Ty.isInt() || Ty.isFloat());
  const BranchHint *H = Hint;
  Hint = nullptr;
  if (Cfg.UseHints && H)
    return genHinted(Ty);
  return Ty.isInt() ? genDefaultInt(Ty.bits()) : genDefaultFloat(Ty.bits());
}

VirtualPtr GenRuntime::genPointer() {
  uint32_t Site = NextSite++;
  for (const Constraint &C : Constraints) {
    if (C.Site != Site)
      continue;
    if (C.K == Constraint::Kind::MustNull) {
      IGEN_DEBUG(logMessage(LogLevel::Debug,
                            "site " + std::to_string(Site) + ": null"));
      return {};
    }
    if (Pool.isLive(C.BaseObject)) {
      const MemoryPool::Object &B = Pool.object(C.BaseObject);
      int64_t Off = static_cast<int64_t>(B.Anchor) + C.AnchorRelOff;
      Off = std::clamp<int64_t>(Off, 0,
                                static_cast<int64_t>(B.RegionSize) - 1);
      IGEN_DEBUG(logMessage(
          LogLevel::Debug, "site " + std::to_string(Site) + ": alias into #" +
                               std::to_string(C.BaseObject) + " at " +
                               std::to_string(Off)));
      return VirtualPtr::encode(C.BaseObject, static_cast<uint64_t>(Off));
    }
  }
  if (chance(Cfg.NullProb))
    return {};
  return Pool.createObject(0, DefaultObjAlignment, Site);
}

uint64_t GenRuntime::freshValue(const Type &Ty, VirtualPtr) {
  if (Ty.isPtr())
    return genPointer().Raw;
  return genNumeric(Ty);
}

uint64_t GenRuntime::argValue(const Type &Ty) {
  uint64_t Bits = Ty.isPtr() ? genPointer().Raw : genNumeric(Ty);
  Args.push_back({tagForType(Ty), Bits});
  return Bits;
}

uint64_t GenRuntime::stubReturn(const std::optional<Type> &RetTy) {
  if (!RetTy)
    return 0;
  uint64_t Bits = RetTy->isPtr() ? genPointer().Raw : genNumeric(*RetTy);
  Stream.Entries.push_back({tagForType(*RetTy), Bits});
  return Bits;
}

int32_t GenRuntime::selectCallee(std::span<const int32_t> Candidates) {
  assert(!Candidates.empty());
  int32_t Chosen;
  if (!Cfg.UseFptrs) {
    Chosen = Candidates.back(); // the stub is always appended last
  } else {
    Chosen = Candidates[nextU64() % Candidates.size()];
  }
  Stream.Entries.push_back(
      {StreamTag::Callee,
       Chosen == StubCallee ? StubCalleeBits : static_cast<uint64_t>(Chosen)});
  return Chosen;
}

GenRuntime::CmpAction GenRuntime::onPtrCmp(VirtualPtr Lhs, VirtualPtr Rhs,
                                           ICmpPred Pred) {
  if (!Cfg.UseRollback)
    return CmpAction::Continue;

  auto liveGenerated = [&](VirtualPtr P) -> const MemoryPool::Object * {
    if (P.isNull() || !Pool.isLive(P.objectIndex()))
      return nullptr;
    const MemoryPool::Object &O = Pool.object(P.objectIndex());
    return O.CreationSite != ~0u ? &O : nullptr;
  };
  auto constrained = [&](uint32_t Site) {
    for (const Constraint &C : Constraints)
      if (C.Site == Site)
        return true;
    return false;
  };

  // comparison against a null constant: the object becomes null on retry
  if (Lhs.isNull() != Rhs.isNull()) {
    const MemoryPool::Object *O = liveGenerated(Lhs.isNull() ? Rhs : Lhs);
    if (!O || constrained(O->CreationSite))
      return CmpAction::Continue;
    if (!chance(Cfg.RollbackProb))
      return CmpAction::Continue;
    Pending = {Constraint::Kind::MustNull, O->CreationSite, 0, 0};
    IGEN_DEBUG(logMessage(LogLevel::Debug,
                          "rollback: null constraint for site " +
                              std::to_string(O->CreationSite)));
    return CmpAction::Rollback;
  }
  if (Lhs.isNull() || Rhs.isNull())
    return CmpAction::Continue;

  ResolvedLoc L = Pool.resolve(Lhs, 1);
  ResolvedLoc R = Pool.resolve(Rhs, 1);
  if (L.Cls != MemClass::RuntimeManaged || R.Cls != MemClass::RuntimeManaged)
    return CmpAction::Continue;
  if (L.Object == R.Object)
    return CmpAction::Continue;

  const MemoryPool::Object &LO = Pool.object(L.Object);
  const MemoryPool::Object &RO = Pool.object(R.Object);
  bool LGen = LO.CreationSite != ~0u;
  bool RGen = RO.CreationSite != ~0u;
  if (!LGen && !RGen)
    return CmpAction::Continue; // two globals never alias

  // the later-created object is replaced by an offset into the earlier one
  bool LaterIsLhs = LGen && (!RGen || LO.CreationSite > RO.CreationSite);
  const MemoryPool::Object &Later = LaterIsLhs ? LO : RO;
  const MemoryPool::Object &Earlier = LaterIsLhs ? RO : LO;
  uint64_t LaterOff = LaterIsLhs ? L.Offset : R.Offset;
  uint64_t EarlierOff = LaterIsLhs ? R.Offset : L.Offset;
  if (constrained(Later.CreationSite))
    return CmpAction::Continue;
  if (!chance(Cfg.RollbackProb))
    return CmpAction::Continue;

  // Choose the retry offset so this comparison settles: equality gets the
  // exact offset, ordered predicates land one access stride onto the
  // satisfying side.
  int64_t Drift =
      static_cast<int64_t>(LaterOff) - static_cast<int64_t>(Later.Anchor);
  int64_t Target = static_cast<int64_t>(EarlierOff);
  bool EqClass = Pred == ICmpPred::Eq || Pred == ICmpPred::Ne ||
                 Pred == ICmpPred::Ule || Pred == ICmpPred::Uge ||
                 Pred == ICmpPred::Sle || Pred == ICmpPred::Sge;
  if (!EqClass) {
    int64_t Stride = Earlier.LastAccessSize ? Earlier.LastAccessSize
                                            : static_cast<int64_t>(
                                                  Earlier.Alignment);
    bool LaterWantsGreater;
    switch (Pred) {
    case ICmpPred::Ult:
    case ICmpPred::Slt:
      LaterWantsGreater = !LaterIsLhs;
      break;
    case ICmpPred::Ugt:
    case ICmpPred::Sgt:
      LaterWantsGreater = LaterIsLhs;
      break;
    default:
      LaterWantsGreater = false;
      break;
    }
    if (LaterWantsGreater)
      Target = std::max<int64_t>(Earlier.Touched ? Earlier.UsedHi : 0,
                                 Target + Stride);
    else
      Target = std::min<int64_t>(Earlier.Touched ? Earlier.UsedLo
                                                 : Target,
                                 Target) -
               Stride;
  }
  int64_t Rel = Target - Drift - static_cast<int64_t>(Earlier.Anchor);
  Pending = {Constraint::Kind::MustAlias, Later.CreationSite, Earlier.Index,
             Rel};
  IGEN_DEBUG(logMessage(
      LogLevel::Debug,
      "rollback: alias site " + std::to_string(Later.CreationSite) +
          " -> object #" + std::to_string(Earlier.Index) + " anchor+" +
          std::to_string(Rel)));
  return CmpAction::Rollback;
}

} // namespace igen
