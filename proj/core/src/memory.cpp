#include "igen/memory.hpp"
#include "igen/support.hpp"

#include <cassert>
#include <cstring>

namespace igen {

const char *trapKindName(TrapKind K) {
  switch (K) {
  case TrapKind::InvalidAccess:
    return "invalid-access";
  case TrapKind::NullDeref:
    return "null-deref";
  case TrapKind::DivByZero:
    return "div-by-zero";
  case TrapKind::StreamExhausted:
    return "stream-exhausted";
  case TrapKind::StreamTypeMismatch:
    return "stream-type-mismatch";
  }
  return "?";
}

MemoryPool::MemoryPool(PoolConfig Cfg) : Cfg(Cfg) {
  Objects.push_back(nullptr); // index 0 reserved
}

void MemoryPool::trapAt(VirtualPtr P) {
  throw MemTrap{P.Raw < NullGuard ? TrapKind::NullDeref
                                  : TrapKind::InvalidAccess};
}

MemoryPool::Page &MemoryPool::pageFor(Object &O, uint64_t PageIdx) {
  if (O.CachedPageIdx == PageIdx && O.CachedPage)
    return *O.CachedPage;
  auto It = O.Pages.find(PageIdx);
  if (It == O.Pages.end()) {
    if ((PageCount + 1) * sizeof(Page) > Cfg.MaxPoolBytes)
      throw PoolExhausted{};
    ++PageCount;
    It = O.Pages.emplace(PageIdx, std::make_unique<Page>()).first;
  }
  O.CachedPageIdx = PageIdx;
  O.CachedPage = It->second.get();
  return *O.CachedPage;
}

MemoryPool::Page *MemoryPool::pageIfPresent(const Object &O,
                                            uint64_t PageIdx) const {
  if (O.CachedPageIdx == PageIdx && O.CachedPage)
    return O.CachedPage;
  auto It = O.Pages.find(PageIdx);
  if (It == O.Pages.end())
    return nullptr;
  O.CachedPageIdx = PageIdx;
  O.CachedPage = It->second.get();
  return O.CachedPage;
}

void MemoryPool::touch(Object &O, uint64_t Off, uint64_t Size) {
  if (!O.Touched) {
    O.Touched = true;
    O.UsedLo = Off;
    O.UsedHi = Off + Size;
  } else {
    if (Off < O.UsedLo)
      O.UsedLo = Off;
    if (Off + Size > O.UsedHi)
      O.UsedHi = Off + Size;
  }
  O.LastAccessSize = static_cast<uint32_t>(Size);
}

VirtualPtr MemoryPool::createObject(uint64_t MinExtent, uint64_t Alignment,
                                    uint32_t CreationSite) {
  if (Objects.size() > Cfg.MaxObjects)
    throw PoolExhausted{};
  if (Alignment == 0)
    Alignment = DefaultObjAlignment;
  uint64_t Region = Cfg.DefaultRegionSize;
  if (MinExtent * 2 + 64 > Region)
    Region = alignUp(MinExtent * 2 + 64, Alignment);
  auto O = std::make_unique<Object>();
  O->Index = static_cast<uint32_t>(Objects.size());
  O->Kind = ObjectKind::Generated;
  O->RegionSize = Region;
  O->Anchor = alignUp(Region / 2, Alignment);
  O->Alignment = Alignment;
  O->CreationSite = CreationSite;
  VirtualPtr P = VirtualPtr::encode(O->Index, O->Anchor);
  IGEN_DEBUG(logMessage(LogLevel::Debug,
                        "new object #" + std::to_string(O->Index) +
                            " anchor " + std::to_string(O->Anchor)));
  Objects.push_back(std::move(O));
  return P;
}

VirtualPtr MemoryPool::registerGlobal(std::string_view Name, uint64_t Size,
                                      uint64_t Alignment,
                                      const uint8_t *Init) {
  std::string Key(Name);
  if (GlobalOffsets.count(Key))
    throw std::logic_error("duplicate global registration: " + Key);
  if (GlobalsObject < 0) {
    if (Objects.size() > Cfg.MaxObjects)
      throw PoolExhausted{};
    auto O = std::make_unique<Object>();
    O->Index = static_cast<uint32_t>(Objects.size());
    O->Kind = ObjectKind::Global;
    O->RegionSize = 0;
    O->Anchor = 0;
    O->Alignment = DefaultObjAlignment;
    GlobalsObject = O->Index;
    Objects.push_back(std::move(O));
  }
  Object &O = mut(static_cast<uint32_t>(GlobalsObject));
  if (Alignment == 0)
    Alignment = 1;
  uint64_t Off = alignUp(GlobalsCursor, Alignment);
  GlobalsCursor = Off + Size;
  O.RegionSize = GlobalsCursor;
  O.Alignment = std::max(O.Alignment, Alignment);
  GlobalOffsets.emplace(Key, Off);
  VirtualPtr P = VirtualPtr::encode(O.Index, Off);
  if (Init && Size)
    seedBytes(O.Index, Off, std::span(Init, Size));
  return P;
}

uint32_t MemoryPool::placeReplayObject(uint64_t AllocSize, uint64_t Alignment,
                                       uint64_t StartOff) {
  if (Objects.size() > Cfg.MaxObjects)
    throw PoolExhausted{};
  auto O = std::make_unique<Object>();
  O->Index = static_cast<uint32_t>(Objects.size());
  O->Kind = ObjectKind::Replayed;
  O->RegionSize = StartOff + AllocSize;
  O->Anchor = StartOff;
  O->Alignment = Alignment;
  uint32_t Idx = O->Index;
  Objects.push_back(std::move(O));
  return Idx;
}

void MemoryPool::reserveIndices(uint64_t N) {
  for (uint64_t I = 0; I < N; ++I) {
    if (Objects.size() > Cfg.MaxObjects)
      throw PoolExhausted{};
    Objects.push_back(nullptr);
  }
}

void MemoryPool::seedBytes(uint32_t Obj, uint64_t Off,
                           std::span<const uint8_t> Bytes) {
  Object &O = mut(Obj);
  assert(Off + Bytes.size() <= O.RegionSize);
  for (size_t I = 0; I < Bytes.size(); ++I) {
    uint64_t B = Off + I;
    Page &Pg = pageFor(O, B / Page::Size);
    uint64_t In = B % Page::Size;
    Pg.Data[In] = Bytes[I];
    Pg.Init[In / 64] |= uint64_t(1) << (In % 64);
  }
  if (!Bytes.empty())
    touch(O, Off, Bytes.size());
}

ResolvedLoc MemoryPool::resolve(VirtualPtr P, uint64_t Size) const {
  assert(Size >= 1);
  if (P.Raw == 0)
    return {};
  uint64_t Idx = P.objectIndex();
  if (Idx == 0) {
    auto It = UserAllocs.upper_bound(P.Raw);
    if (It != UserAllocs.begin()) {
      --It;
      if (It->second.Live && P.Raw >= It->first &&
          P.Raw + Size <= It->first + It->second.Size)
        return {MemClass::UserManaged, 0, P.Raw - It->first};
    }
    return {};
  }
  if (isLive(Idx)) {
    uint64_t Off = P.regionOffset();
    if (Off + Size <= Objects[Idx]->RegionSize)
      return {MemClass::RuntimeManaged, static_cast<uint32_t>(Idx), Off};
  }
  return {};
}

namespace {

bool rangeBitsAllSet(const uint64_t *Words, uint64_t Bit, uint64_t N) {
  while (N) {
    uint64_t W = Bit / 64, B = Bit % 64;
    uint64_t Span = std::min<uint64_t>(N, 64 - B);
    uint64_t Mask = (Span == 64 ? ~uint64_t(0) : ((uint64_t(1) << Span) - 1))
                    << B;
    if ((Words[W] & Mask) != Mask)
      return false;
    Bit += Span;
    N -= Span;
  }
  return true;
}

void rangeBitsSet(uint64_t *Words, uint64_t Bit, uint64_t N) {
  while (N) {
    uint64_t W = Bit / 64, B = Bit % 64;
    uint64_t Span = std::min<uint64_t>(N, 64 - B);
    uint64_t Mask = (Span == 64 ? ~uint64_t(0) : ((uint64_t(1) << Span) - 1))
                    << B;
    Words[W] |= Mask;
    Bit += Span;
    N -= Span;
  }
}

} // namespace

uint64_t MemoryPool::onRead(VirtualPtr P, const Type &Ty, ValueSource *Src) {
  uint64_t Size = Ty.size();
  assert(Ty.isPrimitive() && Size <= 8);
  ResolvedLoc L = resolve(P, Size);
  if (L.Cls == MemClass::Invalid)
    trapAt(P);
  if (L.Cls == MemClass::UserManaged) {
    auto It = UserAllocs.upper_bound(P.Raw);
    --It;
    uint64_t V = 0;
    memcpy(&V, It->second.Data.data() + L.Offset, Size);
    return V;
  }

  Object &O = mut(L.Object);
  uint64_t Off = L.Offset;
  uint64_t InPage = Off % Page::Size;
  bool Within = InPage + Size <= Page::Size;

  if (Within) {
    Page &Pg = pageFor(O, Off / Page::Size);
    if (rangeBitsAllSet(Pg.Init.data(), InPage, Size)) {
      uint64_t V = 0;
      memcpy(&V, Pg.Data.data() + InPage, Size);
      return V;
    }
    if (!Src)
      throw MemTrap{TrapKind::InvalidAccess};
    uint64_t Gen = Src->freshValue(Ty, P);
    bool AllFresh = true;
    for (uint64_t I = 0; I < Size; ++I) {
      uint64_t B = InPage + I;
      if (Pg.Init[B / 64] & (uint64_t(1) << (B % 64))) {
        AllFresh = false;
        continue;
      }
      uint8_t Byte = static_cast<uint8_t>(Gen >> (8 * I));
      Pg.Data[B] = Byte;
      Pg.Shadow[B] = Byte;
      Pg.Init[B / 64] |= uint64_t(1) << (B % 64);
      Pg.InShadow[B / 64] |= uint64_t(1) << (B % 64);
    }
    if (Ty.isPtr() && AllFresh)
      O.PtrSlots.insert(Off);
    touch(O, Off, Size);
    uint64_t V = 0;
    memcpy(&V, Pg.Data.data() + InPage, Size);
    return V;
  }

  // page-straddling access: the slow bytewise path
  bool AllInit = true;
  for (uint64_t I = 0; I < Size && AllInit; ++I) {
    Page *Pg = pageIfPresent(O, (Off + I) / Page::Size);
    uint64_t B = (Off + I) % Page::Size;
    if (!Pg || !(Pg->Init[B / 64] & (uint64_t(1) << (B % 64))))
      AllInit = false;
  }
  if (!AllInit && !Src)
    throw MemTrap{TrapKind::InvalidAccess};
  uint64_t Gen = AllInit ? 0 : Src->freshValue(Ty, P);
  bool AllFresh = true;
  uint64_t V = 0;
  for (uint64_t I = 0; I < Size; ++I) {
    Page &Pg = pageFor(O, (Off + I) / Page::Size);
    uint64_t B = (Off + I) % Page::Size;
    bool Init = Pg.Init[B / 64] & (uint64_t(1) << (B % 64));
    if (!Init) {
      uint8_t Byte = static_cast<uint8_t>(Gen >> (8 * I));
      Pg.Data[B] = Byte;
      Pg.Shadow[B] = Byte;
      Pg.Init[B / 64] |= uint64_t(1) << (B % 64);
      Pg.InShadow[B / 64] |= uint64_t(1) << (B % 64);
    } else {
      AllFresh = false;
    }
    V |= uint64_t(Pg.Data[B]) << (8 * I);
  }
  if (!AllInit) {
    if (Ty.isPtr() && AllFresh)
      O.PtrSlots.insert(Off);
    touch(O, Off, Size);
  }
  return V;
}

void MemoryPool::onWrite(VirtualPtr P, const Type &Ty, uint64_t Bits) {
  uint64_t Size = Ty.size();
  assert(Ty.isPrimitive() && Size <= 8);
  ResolvedLoc L = resolve(P, Size);
  if (L.Cls == MemClass::Invalid)
    trapAt(P);
  if (L.Cls == MemClass::UserManaged) {
    auto It = UserAllocs.upper_bound(P.Raw);
    --It;
    memcpy(It->second.Data.data() + L.Offset, &Bits, Size);
    return;
  }
  Object &O = mut(L.Object);
  uint64_t Off = L.Offset;
  uint64_t InPage = Off % Page::Size;
  if (InPage + Size <= Page::Size) {
    Page &Pg = pageFor(O, Off / Page::Size);
    memcpy(Pg.Data.data() + InPage, &Bits, Size);
    rangeBitsSet(Pg.Init.data(), InPage, Size);
  } else {
    for (uint64_t I = 0; I < Size; ++I) {
      Page &Pg = pageFor(O, (Off + I) / Page::Size);
      uint64_t B = (Off + I) % Page::Size;
      Pg.Data[B] = static_cast<uint8_t>(Bits >> (8 * I));
      Pg.Init[B / 64] |= uint64_t(1) << (B % 64);
    }
  }
  touch(O, Off, Size);
}

VirtualPtr MemoryPool::userAlloc(uint64_t Size) {
  uint64_t Addr = alignUp(UserBrk, DefaultObjAlignment);
  uint64_t Reserve = Size ? Size : 1;
  if (Addr + Reserve + 16 > VpOffsetMask)
    throw PoolExhausted{};
  UserBrk = Addr + Reserve + 16; // guard gap between intervals
  UserAlloc A;
  A.Size = Reserve;
  A.Live = true;
  A.Data.assign(Reserve, 0xAB); // deterministic fill for uninitialized reads
  UserAllocs.emplace(Addr, std::move(A));
  return {Addr};
}

bool MemoryPool::userFree(VirtualPtr P) {
  auto It = UserAllocs.find(P.Raw);
  if (It == UserAllocs.end() || !It->second.Live)
    return false;
  It->second.Live = false;
  It->second.Data.clear();
  It->second.Data.shrink_to_fit();
  return true;
}

std::vector<MemoryPool::ExtentInfo> MemoryPool::snapshotExtents() const {
  std::vector<ExtentInfo> Out;
  for (size_t I = 1; I < Objects.size(); ++I) {
    if (!Objects[I])
      continue;
    const Object &O = *Objects[I];
    ExtentInfo E;
    E.Object = O.Index;
    E.Kind = O.Kind;
    E.Touched = O.Touched;
    if (O.Kind == ObjectKind::Global) {
      // statically sized; the whole packed region is the allocation
      E.Lo = 0;
      E.Hi = O.RegionSize;
    } else {
      E.Lo = O.Touched ? O.UsedLo : 0;
      E.Hi = O.Touched ? O.UsedHi : 0;
    }
    E.Alignment = O.Alignment;
    E.Anchor = O.Anchor;
    E.CreationSite = O.CreationSite;
    Out.push_back(E);
  }
  return Out;
}

std::vector<MemoryPool::ShadowRun> MemoryPool::shadowRuns(uint32_t Obj) const {
  const Object &O = *Objects[Obj];
  std::vector<ShadowRun> Runs;
  if (!O.Touched)
    return Runs;
  bool InRun = false;
  for (uint64_t B = O.UsedLo; B < O.UsedHi; ++B) {
    Page *Pg = pageIfPresent(O, B / Page::Size);
    uint64_t In = B % Page::Size;
    bool InShadow =
        Pg && (Pg->InShadow[In / 64] & (uint64_t(1) << (In % 64)));
    if (InShadow) {
      if (!InRun) {
        Runs.push_back({B, {}});
        InRun = true;
      }
      Runs.back().Bytes.push_back(Pg->Shadow[In]);
    } else {
      InRun = false;
    }
  }
  return Runs;
}

void MemoryPool::peekBytes(uint32_t Obj, uint64_t Off,
                           std::span<uint8_t> Out) const {
  const Object &O = *Objects[Obj];
  for (size_t I = 0; I < Out.size(); ++I) {
    Page *Pg = pageIfPresent(O, (Off + I) / Page::Size);
    Out[I] = Pg ? Pg->Data[(Off + I) % Page::Size] : 0;
  }
}

void MemoryPool::peekShadowBytes(uint32_t Obj, uint64_t Off,
                                 std::span<uint8_t> Out) const {
  const Object &O = *Objects[Obj];
  for (size_t I = 0; I < Out.size(); ++I) {
    Page *Pg = pageIfPresent(O, (Off + I) / Page::Size);
    Out[I] = Pg ? Pg->Shadow[(Off + I) % Page::Size] : 0;
  }
}

} // namespace igen
