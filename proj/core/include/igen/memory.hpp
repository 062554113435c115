#ifndef IGEN_MEMORY_HPP
#define IGEN_MEMORY_HPP

#include "igen/ir.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace igen {

// Virtual addresses split into a 24-bit object index (top) and a 40-bit
// in-object offset (bottom). Index 0 is reserved: raw 0 is null and the
// rest of index 0 is the address space for user-managed allocations, so
// no pool object pointer can ever compare equal to either.
constexpr unsigned VpOffsetBits = 40;
constexpr uint64_t VpOffsetMask = (uint64_t(1) << VpOffsetBits) - 1;
constexpr uint64_t VpMaxObjectIndex = (uint64_t(1) << 24) - 1;

struct VirtualPtr {
  uint64_t Raw = 0;

  static VirtualPtr encode(uint64_t ObjIdx, uint64_t Off) {
    return {(ObjIdx << VpOffsetBits) | (Off & VpOffsetMask)};
  }
  uint64_t objectIndex() const { return Raw >> VpOffsetBits; }
  uint64_t regionOffset() const { return Raw & VpOffsetMask; }
  bool isNull() const { return Raw == 0; }
  bool operator==(const VirtualPtr &O) const { return Raw == O.Raw; }
};

enum class TrapKind : uint8_t {
  InvalidAccess,
  NullDeref,
  DivByZero,
  StreamExhausted,
  StreamTypeMismatch,
};

const char *trapKindName(TrapKind K);

// Thrown on invalid memory accesses and other traps; the interpreter
// converts it into an exit classification.
struct MemTrap {
  TrapKind Kind;
};

// Object indices or backing pages ran out; the generation attempt fails.
struct PoolExhausted {};

enum class ObjectKind : uint8_t { Generated, Global, Replayed };

enum class MemClass : uint8_t { RuntimeManaged, UserManaged, Invalid };

struct ResolvedLoc {
  MemClass Cls = MemClass::Invalid;
  uint32_t Object = 0;
  uint64_t Offset = 0;
};

// Callback producing values for reads of uninitialized runtime-managed
// bytes. The generation runtime implements it; tests can script it.
class ValueSource {
public:
  virtual ~ValueSource() = default;
  virtual uint64_t freshValue(const Type &Ty, VirtualPtr Where) = 0;
};

struct PoolConfig {
  uint64_t DefaultRegionSize = uint64_t(1) << 20;
  uint64_t MaxObjects = VpMaxObjectIndex;
  uint64_t MaxPoolBytes = uint64_t(4) << 30; // backed page budget
};

constexpr uint64_t DefaultObjAlignment = 16;

class MemoryPool {
public:
  struct Page {
    static constexpr uint64_t Size = 4096;
    std::array<uint8_t, Size> Data{};
    std::array<uint8_t, Size> Shadow{};
    std::array<uint64_t, Size / 64> Init{};
    std::array<uint64_t, Size / 64> InShadow{};
  };

  struct Object {
    uint32_t Index = 0;
    ObjectKind Kind = ObjectKind::Generated;
    uint64_t RegionSize = 0;
    uint64_t Anchor = 0; // region offset handed to user code
    uint64_t Alignment = DefaultObjAlignment;
    uint32_t CreationSite = ~0u;
    bool Touched = false;
    uint64_t UsedLo = 0, UsedHi = 0; // valid when Touched
    uint32_t LastAccessSize = 0;
    std::set<uint64_t> PtrSlots; // offsets of fully generated pointer cells
    std::unordered_map<uint64_t, std::unique_ptr<Page>> Pages;
    mutable uint64_t CachedPageIdx = ~uint64_t(0);
    mutable Page *CachedPage = nullptr;
  };

  explicit MemoryPool(PoolConfig Cfg = {});

  // Fresh object with the anchor in the middle of the region, aligned.
  VirtualPtr createObject(uint64_t MinExtent, uint64_t Alignment,
                          uint32_t CreationSite = ~0u);

  // Globals pack into one shared region object created on first use.
  // Initializer bytes count as program writes, not input shadow.
  VirtualPtr registerGlobal(std::string_view Name, uint64_t Size,
                            uint64_t Alignment, const uint8_t *Init);

  // Replay-side placement: an object backing exactly [StartOff,
  // StartOff+AllocSize) of its region.
  uint32_t placeReplayObject(uint64_t AllocSize, uint64_t Alignment,
                             uint64_t StartOff);
  void reserveIndices(uint64_t N);
  // Write bytes and mark them initialized without touching the shadow.
  void seedBytes(uint32_t Obj, uint64_t Off, std::span<const uint8_t> Bytes);

  ResolvedLoc resolve(VirtualPtr P, uint64_t Size) const;

  // Primitive-typed access. Reads of uninitialized runtime-managed bytes
  // consult Src; with no source (replay) they trap instead.
  uint64_t onRead(VirtualPtr P, const Type &Ty, ValueSource *Src);
  void onWrite(VirtualPtr P, const Type &Ty, uint64_t Bits);

  VirtualPtr userAlloc(uint64_t Size);
  bool userFree(VirtualPtr P); // false for unknown/dead intervals

  struct ExtentInfo {
    uint32_t Object;
    ObjectKind Kind;
    bool Touched;
    uint64_t Lo, Hi; // smallest interval covering all touched bytes
    uint64_t Alignment;
    uint64_t Anchor;
    uint32_t CreationSite;
  };
  std::vector<ExtentInfo> snapshotExtents() const;

  struct ShadowRun {
    uint64_t Offset;
    std::vector<uint8_t> Bytes;
  };
  std::vector<ShadowRun> shadowRuns(uint32_t Obj) const;

  bool isLive(uint64_t Index) const {
    return Index >= 1 && Index < Objects.size() && Objects[Index] != nullptr;
  }
  const Object &object(uint64_t Index) const { return *Objects[Index]; }
  size_t objectLimit() const { return Objects.size(); }
  // Raw bytes of the object array (zero for untouched pages); testing and
  // relocation scans.
  void peekBytes(uint32_t Obj, uint64_t Off, std::span<uint8_t> Out) const;
  void peekShadowBytes(uint32_t Obj, uint64_t Off,
                       std::span<uint8_t> Out) const;

  uint64_t pagesAllocated() const { return PageCount; }

private:
  PoolConfig Cfg;
  std::vector<std::unique_ptr<Object>> Objects; // [0] unused
  uint64_t PageCount = 0;

  // globals region
  int64_t GlobalsObject = -1;
  uint64_t GlobalsCursor = 0;
  std::unordered_map<std::string, uint64_t> GlobalOffsets;

  // user-managed space lives at object index 0 above the null guard
  struct UserAlloc {
    uint64_t Size;
    bool Live;
    std::vector<uint8_t> Data;
  };
  static constexpr uint64_t UserBase = 0x10000;
  static constexpr uint64_t NullGuard = 0x1000;
  std::map<uint64_t, UserAlloc> UserAllocs;
  uint64_t UserBrk = UserBase;

  Object &mut(uint32_t Idx) { return *Objects[Idx]; }
  Page &pageFor(Object &O, uint64_t PageIdx);
  Page *pageIfPresent(const Object &O, uint64_t PageIdx) const;
  void touch(Object &O, uint64_t Off, uint64_t Size);
  [[noreturn]] static void trapAt(VirtualPtr P);

  friend class PoolTestPeer;
};

} // namespace igen

#endif // IGEN_MEMORY_HPP
