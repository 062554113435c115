#ifndef IGEN_GENRT_HPP
#define IGEN_GENRT_HPP

#include "igen/ir.hpp"
#include "igen/memory.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace igen {

struct GenConfig {
  uint64_t Seed = 0;
  // default numeric distributions: small ranges keep generated loop bounds
  // and recursion depths manageable
  int64_t IntLo = 0, IntHi = 256;      // uniform [IntLo, IntHi)
  double FloatLo = 0.0, FloatHi = 1.0; // uniform [FloatLo, FloatHi)
  double NullProb = 0.25;
  double RollbackProb = 0.5;
  uint32_t MaxRetries = 16;
  uint64_t TimeoutMs = 5000; // wall-clock backstop per generation session
  uint64_t StepBudget = 10'000'000;
  uint32_t MaxCallDepth = 100'000;
  bool UseHints = true;
  bool UseRollback = true;
  bool UseFptrs = true;
  PoolConfig Pool;
};

// Accumulated across retries of one generation session. Site identity is
// the ordinal of the fresh-pointer request in execution order.
struct Constraint {
  enum class Kind : uint8_t { MustAlias, MustNull };
  Kind K = Kind::MustNull;
  uint32_t Site = 0;
  uint32_t BaseObject = 0;  // MustAlias
  int64_t AnchorRelOff = 0; // MustAlias: offset relative to the base anchor
};
using ConstraintSet = std::vector<Constraint>;

enum class StreamTag : uint8_t {
  I1 = 0,
  I8,
  I16,
  I32,
  I64,
  F32,
  F64,
  Ptr,
  Callee,
};

const char *streamTagName(StreamTag T);
StreamTag tagForType(const Type &Ty);

struct TypedValue {
  StreamTag Tag;
  uint64_t Bits;
  bool operator==(const TypedValue &O) const = default;
};

// Values produced by stubbed externals and indirect-call selections, in
// execution order. Replay consumes it front to back.
struct StubValueStream {
  std::vector<TypedValue> Entries;
};

constexpr uint64_t StubCalleeBits = ~uint64_t(0);

// Thrown when a chance-based rollback abandons the attempt; the retry
// carries the new constraint.
struct RollbackSignal {
  Constraint NewConstraint;
};

// Orderly termination (exit/abort/unreachable); memory state stays valid
// for dumping.
struct GracefulSignal {
  int32_t Code;
};

class GenRuntime final : public ValueSource {
public:
  GenRuntime(MemoryPool &Pool, const GenConfig &Cfg,
             const ConstraintSet &Constraints, uint64_t AttemptSeed);

  uint64_t freshValue(const Type &Ty, VirtualPtr Where) override;

  // Hint context for the next generated numeric value. Taken/NotTaken are
  // the accumulated profile counts of the hinted branch.
  void setActiveHint(const BranchHint *H, uint64_t Taken, uint64_t NotTaken);

  uint64_t genNumeric(const Type &Ty);
  VirtualPtr genPointer();

  uint64_t argValue(const Type &Ty);                    // entry arguments
  uint64_t stubReturn(const std::optional<Type> &RetTy); // stream-recorded
  int32_t selectCallee(std::span<const int32_t> Candidates);

  enum class CmpAction { Continue, Rollback };
  CmpAction onPtrCmp(VirtualPtr Lhs, VirtualPtr Rhs, ICmpPred Pred);
  const Constraint &pendingConstraint() const { return Pending; }

  const std::vector<TypedValue> &args() const { return Args; }
  const StubValueStream &stream() const { return Stream; }
  MemoryPool &pool() { return Pool; }
  uint32_t sitesUsed() const { return NextSite; }

private:
  MemoryPool &Pool;
  const GenConfig &Cfg;
  ConstraintSet Constraints;
  std::mt19937_64 Rng;
  uint32_t NextSite = 0;
  const BranchHint *Hint = nullptr;
  uint64_t HintTaken = 0, HintNotTaken = 0;
  Constraint Pending;
  std::vector<TypedValue> Args;
  StubValueStream Stream;

  uint64_t nextU64() { return Rng(); }
  double unit() { return (Rng() >> 11) * 0x1.0p-53; }
  bool chance(double P) { return unit() < P; }
  uint64_t genDefaultInt(unsigned Bits);
  uint64_t genDefaultFloat(unsigned Bits);
  uint64_t genHinted(const Type &Ty);
};

} // namespace igen

#endif // IGEN_GENRT_HPP
