#ifndef IGEN_SUPPORT_HPP
#define IGEN_SUPPORT_HPP

#include <cassert>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace igen {

// Log level is read once from the IGEN_LOG environment variable
// ("off", "error", "info", "debug" or 0..3).
enum class LogLevel : int { Off = 0, Error = 1, Info = 2, Debug = 3 };

LogLevel logLevel();
bool logEnabled(LogLevel L);
void logMessage(LogLevel L, const std::string &Msg);

#define IGEN_DEBUG(X)                                                          \
  do {                                                                         \
    if (::igen::logEnabled(::igen::LogLevel::Debug)) {                         \
      X;                                                                       \
    }                                                                          \
  } while (0)

constexpr uint64_t FnvOffsetBasis = 0xcbf29ce484222325ull;
constexpr uint64_t FnvPrime = 0x100000001b3ull;

constexpr uint64_t fnv1a64(uint64_t Hash, uint8_t Byte) {
  return (Hash ^ Byte) * FnvPrime;
}

inline uint64_t fnv1a64(std::string_view Data,
                        uint64_t Hash = FnvOffsetBasis) {
  for (char C : Data)
    Hash = fnv1a64(Hash, static_cast<uint8_t>(C));
  return Hash;
}

constexpr uint64_t alignUp(uint64_t V, uint64_t A) {
  assert(A != 0 && (A & (A - 1)) == 0);
  return (V + A - 1) & ~(A - 1);
}

constexpr uint64_t alignDown(uint64_t V, uint64_t A) {
  assert(A != 0 && (A & (A - 1)) == 0);
  return V & ~(A - 1);
}

uint64_t splitmix64(uint64_t X);

// Little-endian byte serialization helpers. The input file format is
// bit-exact across platforms, so every field goes through these.
class ByteWriter {
public:
  void u8(uint8_t V) { Buf.push_back(V); }
  void u16(uint16_t V) { putLE(V, 2); }
  void u32(uint32_t V) { putLE(V, 4); }
  void u64(uint64_t V) { putLE(V, 8); }
  void i64(int64_t V) { putLE(static_cast<uint64_t>(V), 8); }
  void bytes(const uint8_t *Data, size_t Len) {
    Buf.insert(Buf.end(), Data, Data + Len);
  }
  void str(std::string_view S) {
    u32(static_cast<uint32_t>(S.size()));
    bytes(reinterpret_cast<const uint8_t *>(S.data()), S.size());
  }
  std::vector<uint8_t> take() { return std::move(Buf); }
  size_t size() const { return Buf.size(); }

private:
  void putLE(uint64_t V, unsigned N) {
    for (unsigned I = 0; I < N; ++I)
      Buf.push_back(static_cast<uint8_t>(V >> (8 * I)));
  }
  std::vector<uint8_t> Buf;
};

class ByteReader {
public:
  explicit ByteReader(std::span<const uint8_t> Data) : Data(Data) {}

  uint8_t u8() { return static_cast<uint8_t>(getLE(1)); }
  uint16_t u16() { return static_cast<uint16_t>(getLE(2)); }
  uint32_t u32() { return static_cast<uint32_t>(getLE(4)); }
  uint64_t u64() { return getLE(8); }
  int64_t i64() { return static_cast<int64_t>(getLE(8)); }
  std::string str() {
    uint32_t Len = u32();
    if (Pos + Len > Data.size()) {
      Ok = false;
      return {};
    }
    std::string S(reinterpret_cast<const char *>(Data.data() + Pos), Len);
    Pos += Len;
    return S;
  }
  std::vector<uint8_t> bytes(size_t Len) {
    if (Pos + Len > Data.size()) {
      Ok = false;
      return {};
    }
    std::vector<uint8_t> Out(Data.begin() + Pos, Data.begin() + Pos + Len);
    Pos += Len;
    return Out;
  }
  bool ok() const { return Ok; }
  bool atEnd() const { return Pos == Data.size(); }
  size_t pos() const { return Pos; }

private:
  uint64_t getLE(unsigned N) {
    if (Pos + N > Data.size()) {
      Ok = false;
      return 0;
    }
    uint64_t V = 0;
    for (unsigned I = 0; I < N; ++I)
      V |= static_cast<uint64_t>(Data[Pos + I]) << (8 * I);
    Pos += N;
    return V;
  }
  std::span<const uint8_t> Data;
  size_t Pos = 0;
  bool Ok = true;
};

} // namespace igen

#endif // IGEN_SUPPORT_HPP
