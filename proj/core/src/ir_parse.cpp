#include "igen/ir.hpp"
#include "igen/support.hpp"

#include <cassert>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace igen {
namespace {

enum class TokKind : uint8_t {
  Ident,   // bare identifier (keywords, opcodes, labels)
  GName,   // @name
  RName,   // %name
  Num,     // integer or float literal, raw text kept
  LParen,
  RParen,
  LBrace,
  RBrace,
  LBracket,
  RBracket,
  Comma,
  Colon,
  Equals,
  Plus,
  Star,
  Arrow,
  End,
};

struct Tok {
  TokKind K;
  std::string_view Text;
  uint32_t Line, Col;
  bool NumIsFloat = false;
};

class Lexer {
public:
  explicit Lexer(std::string_view Src) : Src(Src) {}

  std::vector<Tok> lexAll() {
    std::vector<Tok> Out;
    for (;;) {
      Tok T = next();
      Out.push_back(T);
      if (T.K == TokKind::End)
        break;
    }
    return Out;
  }

private:
  [[noreturn]] void fail(const std::string &Msg) {
    throw ParseError(Line, col(), Msg);
  }

  uint32_t col() const { return static_cast<uint32_t>(Pos - LineStart) + 1; }

  bool identChar(char C) const {
    return isalnum(static_cast<unsigned char>(C)) || C == '_' || C == '.';
  }

  Tok next() {
    for (;;) {
      while (Pos < Src.size() &&
             (Src[Pos] == ' ' || Src[Pos] == '\t' || Src[Pos] == '\r'))
        ++Pos;
      if (Pos < Src.size() && Src[Pos] == '#') {
        while (Pos < Src.size() && Src[Pos] != '\n')
          ++Pos;
      }
      if (Pos < Src.size() && Src[Pos] == '\n') {
        ++Pos;
        ++Line;
        LineStart = Pos;
        continue;
      }
      break;
    }
    if (Pos >= Src.size())
      return {TokKind::End, {}, Line, col()};

    uint32_t C0 = col();
    char C = Src[Pos];
    auto single = [&](TokKind K) -> Tok {
      ++Pos;
      return {K, Src.substr(Pos - 1, 1), Line, C0};
    };
    switch (C) {
    case '(':
      return single(TokKind::LParen);
    case ')':
      return single(TokKind::RParen);
    case '{':
      return single(TokKind::LBrace);
    case '}':
      return single(TokKind::RBrace);
    case '[':
      return single(TokKind::LBracket);
    case ']':
      return single(TokKind::RBracket);
    case ',':
      return single(TokKind::Comma);
    case ':':
      return single(TokKind::Colon);
    case '=':
      return single(TokKind::Equals);
    case '+':
      return single(TokKind::Plus);
    case '*':
      return single(TokKind::Star);
    default:
      break;
    }
    if (C == '-') {
      if (Pos + 1 < Src.size() && Src[Pos + 1] == '>') {
        Pos += 2;
        return {TokKind::Arrow, Src.substr(Pos - 2, 2), Line, C0};
      }
      if (Pos + 1 < Src.size() &&
          (isdigit(static_cast<unsigned char>(Src[Pos + 1])) ||
           Src[Pos + 1] == 'i' || Src[Pos + 1] == 'n'))
        return lexNumber();
      fail("unexpected character '-'");
    }
    if (isdigit(static_cast<unsigned char>(C)))
      return lexNumber();
    if (C == '@' || C == '%') {
      size_t Start = Pos++;
      while (Pos < Src.size() && identChar(Src[Pos]))
        ++Pos;
      if (Pos == Start + 1)
        fail(std::string("expected name after '") + C + "'");
      return {C == '@' ? TokKind::GName : TokKind::RName,
              Src.substr(Start + 1, Pos - Start - 1), Line, C0};
    }
    if (identChar(C) && !isdigit(static_cast<unsigned char>(C))) {
      size_t Start = Pos;
      while (Pos < Src.size() && identChar(Src[Pos]))
        ++Pos;
      return {TokKind::Ident, Src.substr(Start, Pos - Start), Line, C0};
    }
    fail(std::string("unexpected character '") + C + "'");
  }

  std::string_view Src;
  size_t Pos = 0;
  size_t LineStart = 0;
  uint32_t Line = 1;

  Tok lexNumber() {
    uint32_t C0 = col();
    size_t Start = Pos;
    bool IsFloat = false;
    if (Src[Pos] == '-')
      ++Pos;
    // inf / nan for float round-trips
    if (Pos < Src.size() && (Src[Pos] == 'i' || Src[Pos] == 'n')) {
      while (Pos < Src.size() && identChar(Src[Pos]))
        ++Pos;
      std::string_view T = Src.substr(Start, Pos - Start);
      if (T == "inf" || T == "-inf" || T == "nan" || T == "-nan")
        return {TokKind::Num, T, Line, C0, true};
      fail("malformed number");
    }
    bool Hex = false;
    if (Pos + 1 < Src.size() && Src[Pos] == '0' &&
        (Src[Pos + 1] == 'x' || Src[Pos + 1] == 'X')) {
      Hex = true;
      Pos += 2;
      while (Pos < Src.size() && isxdigit(static_cast<unsigned char>(Src[Pos])))
        ++Pos;
    } else {
      while (Pos < Src.size() && isdigit(static_cast<unsigned char>(Src[Pos])))
        ++Pos;
      if (Pos < Src.size() && Src[Pos] == '.') {
        IsFloat = true;
        ++Pos;
        while (Pos < Src.size() &&
               isdigit(static_cast<unsigned char>(Src[Pos])))
          ++Pos;
      }
      if (Pos < Src.size() && (Src[Pos] == 'e' || Src[Pos] == 'E')) {
        IsFloat = true;
        ++Pos;
        if (Pos < Src.size() && (Src[Pos] == '+' || Src[Pos] == '-'))
          ++Pos;
        while (Pos < Src.size() &&
               isdigit(static_cast<unsigned char>(Src[Pos])))
          ++Pos;
      }
    }
    (void)Hex;
    return {TokKind::Num, Src.substr(Start, Pos - Start), Line, C0, IsFloat};
  }
};

struct PendingReg {
  std::optional<Type> Ty;
  uint32_t FirstUseLine = 0, FirstUseCol = 0;
  bool Defined = false;
};

class Parser {
public:
  explicit Parser(std::string_view Src) : Toks(Lexer(Src).lexAll()) {}

  Module run() {
    collectTopLevel();
    for (auto &FP : FuncBodies)
      parseBody(FP.first, FP.second);
    return std::move(M);
  }

private:
  std::vector<Tok> Toks;
  size_t Cur = 0;
  Module M;
  std::map<std::string, Type, std::less<>> TypeAliases;
  std::unordered_set<std::string> TopNames;
  std::vector<std::pair<uint32_t, size_t>> FuncBodies; // (func idx, tok idx)

  const Tok &peek(size_t Ahead = 0) const {
    size_t I = Cur + Ahead;
    return I < Toks.size() ? Toks[I] : Toks.back();
  }
  Tok take() { return Toks[Cur < Toks.size() - 1 ? Cur++ : Cur]; }

  [[noreturn]] void failAt(const Tok &T, const std::string &Msg) {
    throw ParseError(T.Line, T.Col, Msg);
  }

  Tok expect(TokKind K, const char *What) {
    if (peek().K != K)
      failAt(peek(), std::string("expected ") + What);
    return take();
  }

  bool accept(TokKind K) {
    if (peek().K != K)
      return false;
    ++Cur;
    return true;
  }

  bool acceptIdent(std::string_view S) {
    if (peek().K == TokKind::Ident && peek().Text == S) {
      ++Cur;
      return true;
    }
    return false;
  }

  void defineTopName(const Tok &T) {
    if (!TopNames.insert(std::string(T.Text)).second)
      failAt(T, "duplicate name @" + std::string(T.Text));
  }

  // ---- types ----

  Type parseType() {
    const Tok &T = peek();
    if (T.K == TokKind::Ident) {
      std::string_view S = T.Text;
      if (S == "i1" || S == "i8" || S == "i16" || S == "i32" || S == "i64") {
        take();
        return Type::intTy(static_cast<unsigned>(atoi(S.data() + 1)));
      }
      if (S == "f32" || S == "f64") {
        take();
        return Type::floatTy(static_cast<unsigned>(atoi(S.data() + 1)));
      }
      if (S == "ptr") {
        take();
        return Type::ptrTy();
      }
      failAt(T, "unknown type '" + std::string(S) + "'");
    }
    if (T.K == TokKind::RName) {
      auto It = TypeAliases.find(T.Text);
      if (It == TypeAliases.end())
        failAt(T, "unknown type %" + std::string(T.Text));
      take();
      return It->second;
    }
    if (accept(TokKind::LBracket)) {
      Tok N = expect(TokKind::Num, "array length");
      if (N.NumIsFloat)
        failAt(N, "array length must be an integer");
      uint64_t Count = strtoull(std::string(N.Text).c_str(), nullptr, 0);
      Tok X = expect(TokKind::Ident, "'x'");
      if (X.Text != "x")
        failAt(X, "expected 'x'");
      Type Elem = parseType();
      expect(TokKind::RBracket, "']'");
      return Type::arrayTy(Elem, Count);
    }
    if (accept(TokKind::LBrace)) {
      std::vector<Type> Fields;
      if (!accept(TokKind::RBrace)) {
        do
          Fields.push_back(parseType());
        while (accept(TokKind::Comma));
        expect(TokKind::RBrace, "'}'");
      }
      return Type::structTy(std::move(Fields));
    }
    failAt(T, "expected type");
  }

  std::optional<Type> parseRetType() {
    if (acceptIdent("void"))
      return std::nullopt;
    return parseType();
  }

  // ---- top level ----

  void collectTopLevel() {
    while (peek().K != TokKind::End) {
      Tok T = peek();
      if (T.K != TokKind::Ident)
        failAt(T, "expected top-level declaration");
      if (T.Text == "type") {
        take();
        Tok Name = expect(TokKind::RName, "type alias name");
        expect(TokKind::Equals, "'='");
        Type Ty = parseType();
        if (!TypeAliases.emplace(std::string(Name.Text), Ty).second)
          failAt(Name, "duplicate type alias %" + std::string(Name.Text));
      } else if (T.Text == "global") {
        take();
        parseGlobal();
      } else if (T.Text == "declare") {
        take();
        parseDeclare();
      } else if (T.Text == "func") {
        take();
        parseFuncHeaderAndSkipBody();
      } else {
        failAt(T, "expected 'type', 'global', 'declare' or 'func'");
      }
    }
  }

  void parseGlobal() {
    Tok Name = expect(TokKind::GName, "global name");
    defineTopName(Name);
    expect(TokKind::Colon, "':'");
    GlobalVar G;
    G.Name = Name.Text;
    G.Ty = parseType();
    if (accept(TokKind::Equals)) {
      G.HasInit = true;
      G.Init.assign(G.Ty.size(), 0);
      parseInit(G.Ty, G.Init.data());
    }
    M.Globals.push_back(std::move(G));
  }

  uint64_t parseIntLiteral(const Tok &T) {
    std::string S(T.Text);
    if (S[0] == '-')
      return static_cast<uint64_t>(strtoll(S.c_str(), nullptr, 0));
    return strtoull(S.c_str(), nullptr, 0);
  }

  double parseFloatLiteral(const Tok &T) {
    return strtod(std::string(T.Text).c_str(), nullptr);
  }

  static uint64_t maskToWidth(uint64_t Bits, unsigned W) {
    return W >= 64 ? Bits : (Bits & ((uint64_t(1) << W) - 1));
  }

  void parseInit(const Type &Ty, uint8_t *Out) {
    switch (Ty.kind()) {
    case Type::Kind::Int: {
      Tok T = expect(TokKind::Num, "integer initializer");
      if (T.NumIsFloat)
        failAt(T, "expected integer initializer");
      uint64_t V = maskToWidth(parseIntLiteral(T), Ty.bits());
      memcpy(Out, &V, Ty.size());
      return;
    }
    case Type::Kind::Float: {
      Tok T = expect(TokKind::Num, "float initializer");
      double D = parseFloatLiteral(T);
      if (Ty.bits() == 32) {
        float F = static_cast<float>(D);
        memcpy(Out, &F, 4);
      } else {
        memcpy(Out, &D, 8);
      }
      return;
    }
    case Type::Kind::Ptr: {
      Tok T = take();
      if (T.K != TokKind::Ident || T.Text != "null")
        failAt(T, "pointer initializers must be null");
      return;
    }
    case Type::Kind::Array: {
      if (acceptIdent("zeroinit"))
        return;
      expect(TokKind::LBracket, "'['");
      Type Elem = Ty.elem();
      for (uint64_t I = 0; I < Ty.count(); ++I) {
        if (I)
          expect(TokKind::Comma, "','");
        parseInit(Elem, Out + I * Elem.size());
      }
      expect(TokKind::RBracket, "']'");
      return;
    }
    case Type::Kind::Struct: {
      if (acceptIdent("zeroinit"))
        return;
      expect(TokKind::LBrace, "'{'");
      const auto &Fields = Ty.fields();
      for (unsigned I = 0; I < Fields.size(); ++I) {
        if (I)
          expect(TokKind::Comma, "','");
        parseInit(Fields[I], Out + Ty.fieldOffset(I));
      }
      expect(TokKind::RBrace, "'}'");
      return;
    }
    }
  }

  void parseDeclare() {
    Tok Name = expect(TokKind::GName, "external name");
    defineTopName(Name);
    ExternalDecl E;
    E.Name = Name.Text;
    expect(TokKind::LParen, "'('");
    if (!accept(TokKind::RParen)) {
      do
        E.Params.push_back(parseType());
      while (accept(TokKind::Comma));
      expect(TokKind::RParen, "')'");
    }
    expect(TokKind::Arrow, "'->'");
    E.RetTy = parseRetType();
    E.NoReturn = acceptIdent("noreturn");
    M.Externals.push_back(std::move(E));
  }

  void parseFuncHeaderAndSkipBody() {
    Tok Name = expect(TokKind::GName, "function name");
    defineTopName(Name);
    Function F;
    F.Name = Name.Text;
    expect(TokKind::LParen, "'('");
    std::unordered_set<std::string_view> ParamNames;
    if (!accept(TokKind::RParen)) {
      do {
        Tok P = expect(TokKind::RName, "parameter name");
        if (!ParamNames.insert(P.Text).second)
          failAt(P, "duplicate parameter %" + std::string(P.Text));
        expect(TokKind::Colon, "':'");
        F.Regs.push_back({std::string(P.Text), parseType()});
      } while (accept(TokKind::Comma));
      expect(TokKind::RParen, "')'");
    }
    F.NumParams = static_cast<uint32_t>(F.Regs.size());
    expect(TokKind::Arrow, "'->'");
    F.RetTy = parseRetType();
    expect(TokKind::LBrace, "'{'");
    FuncBodies.emplace_back(static_cast<uint32_t>(M.Functions.size()), Cur);
    M.Functions.push_back(std::move(F));
    // skip to the matching brace; struct types inside the body nest braces
    int Depth = 1;
    while (Depth > 0) {
      if (peek().K == TokKind::End)
        failAt(peek(), "unterminated function body");
      if (peek().K == TokKind::LBrace)
        ++Depth;
      else if (peek().K == TokKind::RBrace)
        --Depth;
      ++Cur;
    }
  }

  // ---- function bodies ----

  struct BodyCtx {
    Function *F = nullptr;
    std::unordered_map<std::string, int32_t> RegIdx;
    std::vector<PendingReg> Pending; // parallel to F->Regs
    std::unordered_map<std::string, int32_t> BlockIdx;
    struct LabelFix {
      uint32_t Block, Instr;
      bool Second;
      Tok Label;
    };
    std::vector<LabelFix> LabelFixes;
  };

  int32_t regRef(BodyCtx &C, const Tok &T, bool Def) {
    auto It = C.RegIdx.find(std::string(T.Text));
    if (It != C.RegIdx.end()) {
      if (Def)
        C.Pending[It->second].Defined = true;
      else if (!C.Pending[It->second].FirstUseLine) {
        C.Pending[It->second].FirstUseLine = T.Line;
        C.Pending[It->second].FirstUseCol = T.Col;
      }
      return It->second;
    }
    int32_t Idx = static_cast<int32_t>(C.F->Regs.size());
    C.F->Regs.push_back({std::string(T.Text), Type::intTy(64)});
    PendingReg P;
    P.Defined = Def;
    if (!Def) {
      P.FirstUseLine = T.Line;
      P.FirstUseCol = T.Col;
    }
    C.Pending.push_back(P);
    C.RegIdx.emplace(C.F->Regs[Idx].Name, Idx);
    return Idx;
  }

  void setRegType(BodyCtx &C, int32_t Idx, const Type &Ty, const Tok &At) {
    auto &P = C.Pending[Idx];
    if (P.Ty && *P.Ty != Ty)
      failAt(At, "register %" + C.F->Regs[Idx].Name +
                     " redefined with different type");
    P.Ty = Ty;
    C.F->Regs[Idx].Ty = Ty;
  }

  void parseBody(uint32_t FuncIdx, size_t TokIdx) {
    Cur = TokIdx;
    BodyCtx C;
    C.F = &M.Functions[FuncIdx];
    for (uint32_t I = 0; I < C.F->NumParams; ++I) {
      C.RegIdx.emplace(C.F->Regs[I].Name, static_cast<int32_t>(I));
      PendingReg P;
      P.Defined = true;
      P.Ty = C.F->Regs[I].Ty;
      C.Pending.push_back(P);
    }

    while (peek().K != TokKind::RBrace) {
      Tok T = peek();
      if (T.K == TokKind::End)
        failAt(T, "unterminated function body");
      if (T.K == TokKind::Ident && peek(1).K == TokKind::Colon) {
        take();
        take();
        if (C.BlockIdx.count(std::string(T.Text)))
          failAt(T, "duplicate label '" + std::string(T.Text) + "'");
        Block B;
        B.Label = T.Text;
        C.F->Blocks.push_back(std::move(B));
        C.BlockIdx.emplace(C.F->Blocks.back().Label,
                           static_cast<int32_t>(C.F->Blocks.size() - 1));
        continue;
      }
      if (C.F->Blocks.empty())
        failAt(T, "instruction before first block label");
      parseInstr(C);
    }
    ++Cur; // '}'

    if (C.F->Blocks.empty())
      failAt(peek(), "function @" + C.F->Name + " has no blocks");

    // Resolve branch targets now that all labels are known.
    for (auto &Fix : C.LabelFixes) {
      auto It = C.BlockIdx.find(std::string(Fix.Label.Text));
      if (It == C.BlockIdx.end())
        failAt(Fix.Label, "undefined label '" + std::string(Fix.Label.Text) +
                              "'");
      Instr &I = C.F->Blocks[Fix.Block].Instrs[Fix.Instr];
      (Fix.Second ? I.Succ1 : I.Succ0) = It->second;
    }

    finalizeTypes(C);
  }

  Operand parseOperand(BodyCtx &C) {
    Tok T = peek();
    if (T.K == TokKind::RName) {
      take();
      return Operand::reg(regRef(C, T, false));
    }
    if (T.K == TokKind::Num) {
      take();
      if (T.NumIsFloat) {
        double D = parseFloatLiteral(T);
        uint64_t Bits;
        memcpy(&Bits, &D, 8);
        return Operand::immFloat(Bits);
      }
      return Operand::immInt(parseIntLiteral(T));
    }
    if (T.K == TokKind::Ident && T.Text == "null") {
      take();
      return Operand::immNull();
    }
    failAt(T, "expected operand");
  }

  bool atOperandStart() const {
    const Tok &T = peek();
    return T.K == TokKind::RName || T.K == TokKind::Num ||
           (T.K == TokKind::Ident && T.Text == "null");
  }

  void parseInstr(BodyCtx &C) {
    Block &B = C.F->Blocks.back();
    Instr I;
    I.Line = peek().Line;

    int32_t ResultIdx = -1;
    Tok ResultTok = peek();
    if (peek().K == TokKind::RName && peek(1).K == TokKind::Equals) {
      ResultTok = take();
      take();
      ResultIdx = regRef(C, ResultTok, true);
    }
    I.Result = ResultIdx;

    Tok OpTok = expect(TokKind::Ident, "instruction");
    std::string_view Op = OpTok.Text;

    auto labelFix = [&](bool Second) {
      Tok L = expect(TokKind::Ident, "label");
      C.LabelFixes.push_back({static_cast<uint32_t>(C.F->Blocks.size() - 1),
                              static_cast<uint32_t>(B.Instrs.size()), Second,
                              L});
    };
    auto setResultTy = [&](const Type &Ty) {
      if (ResultIdx >= 0)
        setRegType(C, ResultIdx, Ty, ResultTok);
    };
    auto needResult = [&] {
      if (ResultIdx < 0)
        failAt(OpTok, std::string(Op) + " requires a result register");
    };

    if (Op == "const") {
      needResult();
      I.Op = Opcode::Const;
      I.Ty = parseType();
      I.HasTy = true;
      I.Ops.push_back(parseOperand(C));
      setResultTy(I.Ty);
    } else if (Op == "add" || Op == "sub" || Op == "mul" || Op == "sdiv" ||
               Op == "udiv" || Op == "fadd" || Op == "fsub" || Op == "fmul" ||
               Op == "fdiv") {
      needResult();
      static const std::pair<const char *, Opcode> Map[] = {
          {"add", Opcode::Add},   {"sub", Opcode::Sub},
          {"mul", Opcode::Mul},   {"sdiv", Opcode::SDiv},
          {"udiv", Opcode::UDiv}, {"fadd", Opcode::FAdd},
          {"fsub", Opcode::FSub}, {"fmul", Opcode::FMul},
          {"fdiv", Opcode::FDiv}};
      for (auto &ME : Map)
        if (Op == ME.first)
          I.Op = ME.second;
      I.Ty = parseType();
      I.HasTy = true;
      I.Ops.push_back(parseOperand(C));
      expect(TokKind::Comma, "','");
      I.Ops.push_back(parseOperand(C));
      setResultTy(I.Ty);
    } else if (Op == "icmp" || Op == "fcmp") {
      needResult();
      I.Op = Op == "icmp" ? Opcode::ICmp : Opcode::FCmp;
      Tok P = expect(TokKind::Ident, "comparison predicate");
      if (Op == "icmp") {
        static const std::pair<const char *, ICmpPred> Preds[] = {
            {"eq", ICmpPred::Eq},   {"ne", ICmpPred::Ne},
            {"ult", ICmpPred::Ult}, {"ule", ICmpPred::Ule},
            {"ugt", ICmpPred::Ugt}, {"uge", ICmpPred::Uge},
            {"slt", ICmpPred::Slt}, {"sle", ICmpPred::Sle},
            {"sgt", ICmpPred::Sgt}, {"sge", ICmpPred::Sge}};
        bool Found = false;
        for (auto &PE : Preds)
          if (P.Text == PE.first) {
            I.Pred = static_cast<uint8_t>(PE.second);
            Found = true;
          }
        if (!Found)
          failAt(P, "unknown icmp predicate");
      } else {
        static const std::pair<const char *, FCmpPred> Preds[] = {
            {"oeq", FCmpPred::Oeq}, {"one", FCmpPred::One},
            {"olt", FCmpPred::Olt}, {"ole", FCmpPred::Ole},
            {"ogt", FCmpPred::Ogt}, {"oge", FCmpPred::Oge}};
        bool Found = false;
        for (auto &PE : Preds)
          if (P.Text == PE.first) {
            I.Pred = static_cast<uint8_t>(PE.second);
            Found = true;
          }
        if (!Found)
          failAt(P, "unknown fcmp predicate");
      }
      I.Ops.push_back(parseOperand(C));
      expect(TokKind::Comma, "','");
      I.Ops.push_back(parseOperand(C));
      setResultTy(Type::intTy(1));
    } else if (Op == "gep") {
      needResult();
      I.Op = Opcode::Gep;
      Tok Base = expect(TokKind::RName, "base pointer register");
      I.Ops.push_back(Operand::reg(regRef(C, Base, false)));
      expect(TokKind::Comma, "','");
      parseGepExpr(C, I);
      setResultTy(Type::ptrTy());
    } else if (Op == "load") {
      needResult();
      I.Op = Opcode::Load;
      I.Ty = parseType();
      I.HasTy = true;
      expect(TokKind::Comma, "','");
      Tok P = expect(TokKind::RName, "pointer register");
      I.Ops.push_back(Operand::reg(regRef(C, P, false)));
      setResultTy(I.Ty);
    } else if (Op == "store") {
      I.Op = Opcode::Store;
      I.Ty = parseType();
      I.HasTy = true;
      I.Ops.push_back(parseOperand(C)); // value
      expect(TokKind::Comma, "','");
      Tok P = expect(TokKind::RName, "pointer register");
      I.Ops.push_back(Operand::reg(regRef(C, P, false)));
    } else if (Op == "call") {
      I.Op = Opcode::Call;
      Tok Callee = expect(TokKind::GName, "callee");
      I.Callee = Callee.Text;
      expect(TokKind::LParen, "'('");
      if (!accept(TokKind::RParen)) {
        do
          I.Ops.push_back(parseOperand(C));
        while (accept(TokKind::Comma));
        expect(TokKind::RParen, "')'");
      }
      // result typing happens in finalizeTypes once callee sigs are known
    } else if (Op == "icall") {
      I.Op = Opcode::ICall;
      if (acceptIdent("void")) {
        if (ResultIdx >= 0)
          failAt(OpTok, "void icall cannot have a result");
      } else {
        I.Ty = parseType();
        I.HasTy = true;
        setResultTy(I.Ty);
      }
      Tok FP = expect(TokKind::RName, "callee pointer register");
      I.Ops.push_back(Operand::reg(regRef(C, FP, false)));
      expect(TokKind::LParen, "'('");
      if (!accept(TokKind::RParen)) {
        do
          I.Ops.push_back(parseOperand(C));
        while (accept(TokKind::Comma));
        expect(TokKind::RParen, "')'");
      }
    } else if (Op == "select") {
      needResult();
      I.Op = Opcode::Select;
      I.Ops.push_back(parseOperand(C));
      expect(TokKind::Comma, "','");
      I.Ops.push_back(parseOperand(C));
      expect(TokKind::Comma, "','");
      I.Ops.push_back(parseOperand(C));
    } else if (Op == "cast") {
      needResult();
      I.Op = Opcode::Cast;
      Tok K = expect(TokKind::Ident, "cast kind");
      static const std::pair<const char *, CastKind> Kinds[] = {
          {"trunc", CastKind::Trunc},     {"zext", CastKind::ZExt},
          {"sext", CastKind::SExt},       {"fptrunc", CastKind::FPTrunc},
          {"fpext", CastKind::FPExt},     {"sitofp", CastKind::SIToFP},
          {"uitofp", CastKind::UIToFP},   {"fptosi", CastKind::FPToSI},
          {"fptoui", CastKind::FPToUI},   {"bitcast", CastKind::Bitcast},
          {"ptrtoint", CastKind::PtrToInt}, {"inttoptr", CastKind::IntToPtr}};
      bool Found = false;
      for (auto &KE : Kinds)
        if (K.Text == KE.first) {
          I.CK = KE.second;
          Found = true;
        }
      if (!Found)
        failAt(K, "unknown cast kind");
      I.Ty = parseType();
      I.HasTy = true;
      expect(TokKind::Comma, "','");
      I.Ops.push_back(parseOperand(C));
      setResultTy(I.Ty);
    } else if (Op == "alloca") {
      needResult();
      I.Op = Opcode::Alloca;
      I.Ty = parseType();
      I.HasTy = true;
      setResultTy(Type::ptrTy());
    } else if (Op == "br") {
      I.Op = Opcode::Br;
      Tok Cond = expect(TokKind::RName, "branch condition register");
      I.Ops.push_back(Operand::reg(regRef(C, Cond, false)));
      expect(TokKind::Comma, "','");
      labelFix(false);
      expect(TokKind::Comma, "','");
      labelFix(true);
    } else if (Op == "jmp") {
      I.Op = Opcode::Jmp;
      labelFix(false);
    } else if (Op == "ret") {
      I.Op = Opcode::Ret;
      if (C.F->RetTy)
        I.Ops.push_back(parseOperand(C));
    } else if (Op == "unreachable") {
      I.Op = Opcode::Unreachable;
    } else {
      failAt(OpTok, "unknown instruction '" + std::string(Op) + "'");
    }

    B.Instrs.push_back(std::move(I));
  }

  void parseGepExpr(BodyCtx &C, Instr &I) {
    do {
      Tok T = peek();
      if (T.K == TokKind::Num) {
        take();
        if (T.NumIsFloat)
          failAt(T, "gep offsets must be integral");
        int64_t V = static_cast<int64_t>(parseIntLiteral(T));
        if (accept(TokKind::Star)) {
          Tok R = expect(TokKind::RName, "register");
          I.GepScaled.emplace_back(V, regRef(C, R, false));
        } else {
          I.GepConst += V;
        }
      } else if (T.K == TokKind::RName) {
        take();
        I.GepScaled.emplace_back(1, regRef(C, T, false));
      } else {
        failAt(T, "expected gep offset term");
      }
    } while (accept(TokKind::Plus));
  }

  // Infer the remaining register types (select results), check that every
  // used register is defined somewhere, and mask integer immediates to
  // their context width.
  void finalizeTypes(BodyCtx &C) {
    Function &F = *C.F;
    for (size_t I = 0; I < C.Pending.size(); ++I) {
      if (!C.Pending[I].Defined)
        throw ParseError(C.Pending[I].FirstUseLine, C.Pending[I].FirstUseCol,
                         "undefined register %" + F.Regs[I].Name);
    }

    auto regTy = [&](const Operand &O) -> std::optional<Type> {
      if (!O.isReg())
        return std::nullopt;
      return C.Pending[O.Reg].Ty;
    };

    bool Changed = true;
    while (Changed) {
      Changed = false;
      for (Block &B : F.Blocks) {
        for (Instr &I : B.Instrs) {
          if (I.Op != Opcode::Select || I.Result < 0 ||
              C.Pending[I.Result].Ty)
            continue;
          std::optional<Type> Ty = regTy(I.Ops[1]);
          if (!Ty)
            Ty = regTy(I.Ops[2]);
          if (Ty) {
            C.Pending[I.Result].Ty = *Ty;
            F.Regs[I.Result].Ty = *Ty;
            Changed = true;
          }
        }
      }
    }

    for (Block &B : F.Blocks) {
      for (Instr &I : B.Instrs) {
        if (I.Op == Opcode::Call && I.Result >= 0) {
          std::optional<Type> Ret = calleeRetTy(I.Callee);
          if (Ret && !C.Pending[I.Result].Ty) {
            C.Pending[I.Result].Ty = *Ret;
            F.Regs[I.Result].Ty = *Ret;
          }
        }
        if (I.Op == Opcode::Select && I.Result >= 0 &&
            !C.Pending[I.Result].Ty)
          throw ParseError(I.Line, 1, "cannot infer select result type");
        maskImmediates(C, F, I);
      }
    }
  }

  std::optional<std::optional<Type>> calleeSigRet(std::string_view Name) {
    int FI = M.findFunction(Name);
    if (FI >= 0)
      return M.Functions[FI].RetTy;
    int EI = M.findExternal(Name);
    if (EI >= 0)
      return M.Externals[EI].RetTy;
    if (auto CC = classifyCallee(M, Name))
      if (CC->HasIntrin)
        return intrinsicSignature(CC->Intrin).RetTy;
    return std::nullopt;
  }

  std::optional<Type> calleeRetTy(std::string_view Name) {
    auto R = calleeSigRet(Name);
    if (!R)
      return std::nullopt;
    return *R;
  }

  std::vector<Type> calleeParamTys(std::string_view Name) {
    int FI = M.findFunction(Name);
    if (FI >= 0) {
      std::vector<Type> Ps;
      for (uint32_t I = 0; I < M.Functions[FI].NumParams; ++I)
        Ps.push_back(M.Functions[FI].Regs[I].Ty);
      return Ps;
    }
    int EI = M.findExternal(Name);
    if (EI >= 0)
      return M.Externals[EI].Params;
    if (auto CC = classifyCallee(M, Name))
      if (CC->HasIntrin)
        return intrinsicSignature(CC->Intrin).Params;
    return {};
  }

  void maskImm(Operand &O, const Type &Ty) {
    if (O.K == Operand::Kind::ImmInt && Ty.isInt())
      O.Bits = maskToWidth(O.Bits, Ty.bits());
    if (O.K == Operand::Kind::ImmFloat && Ty.isFloat() && Ty.bits() == 32) {
      double D;
      memcpy(&D, &O.Bits, 8);
      float G = static_cast<float>(D);
      uint32_t B32;
      memcpy(&B32, &G, 4);
      O.Bits = B32;
    }
    if (O.K == Operand::Kind::ImmInt && Ty.isFloat()) {
      // integer literal in float context, e.g. fadd f64 %a, 1
      double D = static_cast<double>(static_cast<int64_t>(O.Bits));
      if (Ty.bits() == 32) {
        float G = static_cast<float>(D);
        uint32_t B32;
        memcpy(&B32, &G, 4);
        O.Bits = B32;
      } else {
        memcpy(&O.Bits, &D, 8);
      }
      O.K = Operand::Kind::ImmFloat;
    }
  }

  void maskImmediates(BodyCtx &C, Function &F, Instr &I) {
    auto regTy = [&](const Operand &O) -> std::optional<Type> {
      if (!O.isReg())
        return std::nullopt;
      return C.Pending[O.Reg].Ty;
    };
    switch (I.Op) {
    case Opcode::Const:
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::SDiv:
    case Opcode::UDiv:
    case Opcode::FAdd:
    case Opcode::FSub:
    case Opcode::FMul:
    case Opcode::FDiv:
      for (Operand &O : I.Ops)
        maskImm(O, I.Ty);
      break;
    case Opcode::ICmp:
    case Opcode::FCmp: {
      std::optional<Type> Ty = regTy(I.Ops[0]);
      if (!Ty)
        Ty = regTy(I.Ops[1]);
      if (!Ty) {
        if (!I.Ops[0].isReg() && !I.Ops[1].isReg())
          throw ParseError(I.Line, 1,
                           "cannot infer comparison type from immediates");
        break; // untypable register operand; the validator reports it
      }
      for (Operand &O : I.Ops)
        maskImm(O, *Ty);
      break;
    }
    case Opcode::Store:
      maskImm(I.Ops[0], I.Ty);
      break;
    case Opcode::Select:
      if (I.Result >= 0 && C.Pending[I.Result].Ty) {
        maskImm(I.Ops[1], *C.Pending[I.Result].Ty);
        maskImm(I.Ops[2], *C.Pending[I.Result].Ty);
      }
      break;
    case Opcode::Cast:
      // operand type is the source; leave raw, the interpreter masks
      break;
    case Opcode::Call: {
      std::vector<Type> Ps = calleeParamTys(I.Callee);
      for (size_t A = 0; A < I.Ops.size() && A < Ps.size(); ++A)
        maskImm(I.Ops[A], Ps[A]);
      break;
    }
    case Opcode::ICall: {
      // args beyond the callee pointer follow their own register types;
      // immediates keep raw 64-bit form and are masked by the callee
      break;
    }
    case Opcode::Ret:
      if (!I.Ops.empty() && F.RetTy)
        maskImm(I.Ops[0], *F.RetTy);
      break;
    default:
      break;
    }
  }
};

} // namespace

Module parseModule(std::string_view Text) { return Parser(Text).run(); }

} // namespace igen
