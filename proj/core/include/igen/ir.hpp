#ifndef IGEN_IR_HPP
#define IGEN_IR_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace igen {

// Value types of the IR. Immutable and cheap to copy; aggregate nodes are
// shared behind the scenes so modules can be used concurrently once built.
//
// Layout is C-like: each struct field starts at a multiple of its natural
// alignment, struct size is padded to a multiple of the struct alignment,
// and pointers are 8 bytes. A zero-length array has size 0 and is only
// valid as the last field of a struct.
class Type {
public:
  enum class Kind : uint8_t { Int, Float, Ptr, Array, Struct };

  Type() : Type(intTy(64)) {}

  static Type intTy(unsigned Bits);   // 1, 8, 16, 32, 64
  static Type floatTy(unsigned Bits); // 32, 64
  static Type ptrTy();
  static Type arrayTy(Type Elem, uint64_t Count);
  static Type structTy(std::vector<Type> Fields);

  Kind kind() const;
  unsigned bits() const; // int/float width
  Type elem() const;
  uint64_t count() const;
  const std::vector<Type> &fields() const;
  uint64_t fieldOffset(unsigned Idx) const;

  uint64_t size() const;
  uint64_t align() const;

  bool isInt() const { return kind() == Kind::Int; }
  bool isFloat() const { return kind() == Kind::Float; }
  bool isPtr() const { return kind() == Kind::Ptr; }
  bool isAggregate() const {
    return kind() == Kind::Array || kind() == Kind::Struct;
  }
  bool isPrimitive() const { return !isAggregate(); }

  bool operator==(const Type &O) const;
  bool operator!=(const Type &O) const { return !(*this == O); }

  std::string str() const;

private:
  struct Node;
  explicit Type(std::shared_ptr<const Node> N) : N(std::move(N)) {}
  std::shared_ptr<const Node> N;
};

// A primitive component of a decomposed aggregate access.
struct PrimAccess {
  uint64_t Offset;
  Type Ty;
};

// Decompose an aggregate load/store at ByteOffset into its primitive
// components, in ascending offset order. Padding bytes are not covered.
// Throws std::invalid_argument if Ty is already primitive.
std::vector<PrimAccess> decomposeAggregate(const Type &Ty,
                                           uint64_t ByteOffset);

enum class Opcode : uint8_t {
  Const,
  Add,
  Sub,
  Mul,
  SDiv,
  UDiv,
  FAdd,
  FSub,
  FMul,
  FDiv,
  ICmp,
  FCmp,
  Gep,
  Load,
  Store,
  Call,
  ICall,
  Select,
  Cast,
  Alloca,
  Br,
  Jmp,
  Ret,
  Unreachable,
};

enum class ICmpPred : uint8_t { Eq, Ne, Ult, Ule, Ugt, Uge, Slt, Sle, Sgt, Sge };
enum class FCmpPred : uint8_t { Oeq, One, Olt, Ole, Ogt, Oge };

enum class CastKind : uint8_t {
  Trunc,
  ZExt,
  SExt,
  FPTrunc,
  FPExt,
  SIToFP,
  UIToFP,
  FPToSI,
  FPToUI,
  Bitcast,
  PtrToInt,
  IntToPtr,
};

// Register operand or immediate. Integer immediates are stored masked to
// the operand type width; float immediates store the bit pattern.
struct Operand {
  enum class Kind : uint8_t { Reg, ImmInt, ImmFloat, ImmNull };
  Kind K = Kind::Reg;
  int32_t Reg = -1;
  uint64_t Bits = 0;

  static Operand reg(int32_t R) { return {Kind::Reg, R, 0}; }
  static Operand immInt(uint64_t B) { return {Kind::ImmInt, -1, B}; }
  static Operand immFloat(uint64_t B) { return {Kind::ImmFloat, -1, B}; }
  static Operand immNull() { return {Kind::ImmNull, -1, 0}; }
  bool isReg() const { return K == Kind::Reg; }
};

struct Instr {
  Opcode Op;
  int32_t Result = -1; // destination register, -1 if none
  Type Ty;             // operand/result type where meaningful
  bool HasTy = false;
  uint8_t Pred = 0; // ICmpPred or FCmpPred
  CastKind CK = CastKind::Trunc;
  std::vector<Operand> Ops;
  // gep offset expression: GepConst + sum(Scale * sext(reg))
  int64_t GepConst = 0;
  std::vector<std::pair<int64_t, int32_t>> GepScaled;
  std::string Callee; // call target name
  int32_t Succ0 = -1; // br taken / jmp target
  int32_t Succ1 = -1; // br not-taken
  uint32_t Line = 0;

  bool isTerminator() const {
    return Op == Opcode::Br || Op == Opcode::Jmp || Op == Opcode::Ret ||
           Op == Opcode::Unreachable;
  }
};

struct Block {
  std::string Label;
  std::vector<Instr> Instrs;
};

struct RegInfo {
  std::string Name;
  Type Ty;
};

struct Function {
  std::string Name;
  std::vector<RegInfo> Regs; // Regs[0..NumParams) are the parameters
  uint32_t NumParams = 0;
  std::optional<Type> RetTy; // nullopt = void
  std::vector<Block> Blocks; // Blocks[0] is the entry block
};

struct GlobalVar {
  std::string Name;
  Type Ty;
  bool HasInit = false;
  std::vector<uint8_t> Init; // sized Ty.size() when HasInit
};

struct ExternalDecl {
  std::string Name;
  std::vector<Type> Params;
  std::optional<Type> RetTy;
  bool NoReturn = false;
};

struct Signature {
  std::vector<Type> Params;
  std::optional<Type> RetTy;
  bool operator==(const Signature &O) const;
  std::string str() const;
};

struct Module {
  std::vector<GlobalVar> Globals;
  std::vector<Function> Functions;
  std::vector<ExternalDecl> Externals;

  int findFunction(std::string_view Name) const;
  int findExternal(std::string_view Name) const;
  int findGlobal(std::string_view Name) const;
};

Signature signatureOf(const Function &F);
Signature signatureOf(const ExternalDecl &E);

struct ParseError : std::runtime_error {
  ParseError(uint32_t Line, uint32_t Col, const std::string &Msg)
      : std::runtime_error("line " + std::to_string(Line) + ":" +
                           std::to_string(Col) + ": " + Msg),
        Line(Line), Col(Col) {}
  uint32_t Line, Col;
};

// Parse the textual form. Throws ParseError on the first syntax error,
// duplicate name, unknown type, or undefined register.
Module parseModule(std::string_view Text);

// Canonical printer. parse(print(parse(T))) == parse(T) structurally, and
// the printed form is what the module hash is computed over.
std::string printModule(const Module &M);

// Structural and type checks beyond what the parser enforces. Returns one
// diagnostic string per problem; empty means the module is well formed.
std::vector<std::string> validateModule(const Module &M);

// ---- Callee classification ----

enum class IntrinsicKind : uint8_t { Malloc, Free, Memcpy, Memset, Exit, Abort };

struct CalleeClass {
  enum class Kind : uint8_t {
    Defined,
    Intrinsic,
    StubbedExternal,
    NonReturningExternal,
  };
  Kind K;
  IntrinsicKind Intrin = IntrinsicKind::Malloc; // valid for Intrinsic and
                                                // exit/abort
  bool HasIntrin = false;
  int32_t FuncIdx = -1;   // Defined
  int32_t ExternIdx = -1; // Stubbed/NonReturning externals
};

// Classify a call target. Returns nullopt for unknown names. exit and
// abort always classify as NonReturningExternal; the other allow-listed
// intrinsics are malloc, free, memcpy and memset.
std::optional<CalleeClass> classifyCallee(const Module &M,
                                          std::string_view Name);

// Signature the interpreter expects for an allow-listed intrinsic.
Signature intrinsicSignature(IntrinsicKind K);

// ---- Call graph ----

// Reflexive-transitive reachability between defined functions. Indirect
// call sites conservatively add edges to every signature-compatible
// defined function.
class CallGraph {
public:
  static CallGraph build(const Module &M);
  bool reaches(uint32_t From, uint32_t To) const;
  size_t numFunctions() const { return Reach.size(); }

private:
  std::vector<std::vector<bool>> Reach;
};

// Sentinel candidate standing for the synthesized stub callee.
constexpr int32_t StubCallee = -1;

// Defined functions whose signature matches Sig exactly, in module order,
// minus any that can reach the caller, with the stub sentinel appended.
std::vector<int32_t> indirectCandidates(const Module &M, uint32_t CallerIdx,
                                        const Signature &Sig,
                                        const CallGraph &CG);

// ---- Branch hints ----

// Statically extracted link between a value produced by the generation
// runtime (a load or stubbed-external return) and a conditional branch on
// a comparison of that value against a constant. All involved
// instructions sit in the same basic block.
struct BranchHint {
  uint32_t Block = 0;
  uint32_t ValueInstr = 0;  // the load/call producing the value
  uint32_t BranchInstr = 0; // the conditional br
  bool IsFloat = false;     // predicate namespace
  uint8_t Pred = 0;         // ICmpPred or FCmpPred
  uint64_t ConstBits = 0;   // constant side, in the value type
  Type ValueTy;
  bool ValueOnLhs = true; // generated value is the lhs of the comparison
};

std::vector<BranchHint> extractBranchHints(const Module &M,
                                           const Function &F);

const char *icmpPredName(ICmpPred P);
const char *fcmpPredName(FCmpPred P);
const char *castKindName(CastKind K);

} // namespace igen

#endif // IGEN_IR_HPP
