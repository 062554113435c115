#ifndef IGEN_INPUT_FILE_HPP
#define IGEN_INPUT_FILE_HPP

#include "igen/genrt.hpp"
#include "igen/ir.hpp"
#include "igen/memory.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace igen {

// Binary input format, little-endian throughout:
//   magic "IGIN", version u32, module hash u64, entry name
//   callee table (function names; "" is the synthesized stub)
//   object table: id, alloc size, anchor offset, alignment, initialized
//     runs (offset, length, bytes), offsets relative to the allocation
//   relocation table: holder (object id, ARGS or STREAM), offset, then
//     data -> (target object id or 0 for null, signed target offset)
//     function -> callee table index
//   args, then stream, as (tag, bits) pairs
// Pointer cells store zero placeholders; the relocation entry is
// authoritative.
constexpr uint32_t InputMagic = 0x4e494749; // "IGIN"
constexpr uint32_t InputVersion = 1;
constexpr uint64_t HolderArgs = ~uint64_t(0);
constexpr uint64_t HolderStream = ~uint64_t(0) - 1;
constexpr uint64_t NullObjectId = 0;

struct InputObject {
  uint64_t Id = 0;
  uint64_t AllocSize = 0;
  int64_t AnchorOffset = 0; // anchor relative to the allocation start
  uint64_t Alignment = DefaultObjAlignment;
  struct Run {
    uint64_t Offset;
    std::vector<uint8_t> Bytes;
  };
  std::vector<Run> Runs;
};

struct Reloc {
  uint64_t Holder = 0; // object id, HolderArgs or HolderStream
  uint64_t Offset = 0; // byte offset, or arg/stream index
  bool IsFunc = false;
  uint64_t TargetObj = NullObjectId;
  int64_t TargetOff = 0;
  uint32_t CalleeIdx = 0;
};

struct GeneratedInput {
  uint64_t ModuleHash = 0;
  std::string Entry;
  std::vector<std::string> Callees;
  std::vector<InputObject> Objects;
  std::vector<Reloc> Relocs;
  std::vector<TypedValue> Args;
  std::vector<TypedValue> Stream;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadError : std::runtime_error {
  enum class Kind { BadFormat, HashMismatch, BadModuleBinding };
  LoadError(Kind K, const std::string &Msg)
      : std::runtime_error(Msg), K(K) {}
  Kind K;
};

// Raised while assembling an input from a finished run, e.g. a pointer
// into a dead object; the attempt is reclassified as a failure.
struct DumpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

uint64_t moduleHash(const Module &M);

std::vector<uint8_t> encodeInput(const GeneratedInput &In);
GeneratedInput decodeInput(std::span<const uint8_t> Bytes); // FormatError

// Structural validation without executing anything.
std::vector<std::string> verifyInput(std::span<const uint8_t> Bytes);

// Assemble the minimal input record from a finished generation run: only
// touched objects (plus empty relocation targets) are stored, runs cover
// exactly the shadow bytes, and every pointer-typed shadow cell, argument
// and stream entry gets a relocation entry.
GeneratedInput buildInput(const MemoryPool &Pool,
                          const std::vector<TypedValue> &Args,
                          const StubValueStream &Stream, const Module &M,
                          const std::string &Entry, uint64_t ModuleHash);

void registerModuleGlobals(MemoryPool &Pool, const Module &M);

struct LoadOptions {
  uint64_t IndexDelta = 0; // shift replayed object indices
  uint64_t ByteJitter = 0; // shift in-region placement
};

// A restored memory image: fresh pool with the module globals registered,
// every stored object placed at a new base, runs applied and every
// pointer cell rewritten to new_base(target) + target_offset.
struct LoadedImage {
  GeneratedInput Record;
  MemoryPool Pool;
  uint32_t EntryIdx = 0;
  std::vector<TypedValue> Args;   // pointers rewritten
  std::vector<TypedValue> Stream; // callees resolved to function indices
  std::unordered_map<uint64_t, VirtualPtr> BaseOf; // old id -> new base
};

LoadedImage loadInput(std::span<const uint8_t> Bytes, const Module &M,
                      const LoadOptions &Opts = {});

} // namespace igen

#endif // IGEN_INPUT_FILE_HPP
