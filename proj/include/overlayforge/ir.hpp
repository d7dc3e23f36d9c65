#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "overlayforge/common.hpp"
#include "overlayforge/ops.hpp"

namespace overlayforge::ir {

struct Operand {
  std::string name;          // empty for literals
  std::int64_t literal = 0;

  static Operand value(std::string n) { return Operand{std::move(n), 0}; }
  static Operand constant(std::int64_t v) { return Operand{{}, v}; }
  bool is_literal() const { return name.empty(); }
  friend bool operator==(const Operand &, const Operand &) = default;
};

struct Instruction {
  std::vector<std::string> results; // one for value-producing ops, n for hwcall
  OpKind kind;
  std::vector<Operand> operands;     // position = operand port
  std::vector<std::string> targets;  // phi incoming blocks, br/condbr successors
  std::uint32_t width = 32;
  std::vector<std::uint32_t> lines;  // source-line annotations
  std::uint32_t kernel = 0;          // hwcall target

  Opcode op() const { return kind.op; }
  bool has_result() const { return !results.empty(); }
  const std::string &result() const { return results.front(); }
  friend bool operator==(const Instruction &, const Instruction &) = default;
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> instructions;
  Instruction terminator;
  friend bool operator==(const BasicBlock &, const BasicBlock &) = default;
};

struct Param {
  std::string name;
  std::uint32_t width = 32;
  friend bool operator==(const Param &, const Param &) = default;
};

struct IrFunction {
  std::string name;
  std::vector<Param> params;
  std::vector<BasicBlock> blocks; // blocks.front() is the entry

  const BasicBlock *find_block(std::string_view label) const {
    for (const auto &b : blocks)
      if (b.label == label) return &b;
    return nullptr;
  }
  std::size_t block_index(std::string_view label) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].label == label) return i;
    fail(ErrorKind::InvalidModule, "no block '", label, "' in function '", name, "'");
  }
  friend bool operator==(const IrFunction &, const IrFunction &) = default;
};

struct IrModule {
  std::string name;
  std::vector<IrFunction> functions;

  const IrFunction *find_function(std::string_view n) const {
    for (const auto &f : functions)
      if (f.name == n) return &f;
    return nullptr;
  }
  std::size_t block_count() const {
    std::size_t n = 0;
    for (const auto &f : functions) n += f.blocks.size();
    return n;
  }
};

namespace detail {

enum class Tok { Name, Int, Punct, End };

struct Token {
  Tok type = Tok::End;
  std::string text;
  std::int64_t value = 0;
  std::size_t line = 1;
  std::size_t column = 1;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' || src_[pos_] == '.'))
          advance();
        t.type = Tok::Name;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '-' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        std::size_t start = pos_;
        advance();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        t.type = Tok::Int;
        t.text = std::string(src_.substr(start, pos_ - start));
        try {
          t.value = std::stoll(t.text);
        } catch (const std::exception &) {
          throw ParseError(ErrorKind::Syntax, "integer literal out of range '" + t.text + "'", t.line, t.column);
        }
      } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
        advance();
        advance();
        t.type = Tok::Punct;
        t.text = "->";
      } else if (std::string_view("(){},;:=!").find(c) != std::string_view::npos) {
        advance();
        t.type = Tok::Punct;
        t.text = std::string(1, c);
      } else {
        throw ParseError(ErrorKind::Syntax, std::string("unexpected character '") + c + "'", line_, col_);
      }
      out.push_back(std::move(t));
    }
  }

private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_space() {
    while (pos_ < src_.size()) {
      if (src_[pos_] == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
public:
  explicit Parser(std::string_view src) : toks_(Lexer(src).run()) {}

  IrModule module() {
    IrModule m;
    std::set<std::string> names;
    while (peek().type != Tok::End) {
      const Token at = peek();
      auto f = function();
      if (!names.insert(f.name).second)
        throw ParseError(ErrorKind::InvalidModule, "duplicate function '" + f.name + "'", at.line, at.column);
      m.functions.push_back(std::move(f));
    }
    return m;
  }

private:
  struct Use {
    std::string name;
    Token at;
  };

  const Token &peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  Token next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  [[noreturn]] void syntax(const Token &t, const std::string &msg) const {
    throw ParseError(ErrorKind::Syntax, msg + (t.type == Tok::End ? " (at end of input)" : " near '" + t.text + "'"),
                     t.line, t.column);
  }
  bool is_punct(std::string_view p, std::size_t k = 0) const { return peek(k).type == Tok::Punct && peek(k).text == p; }
  void expect(std::string_view p) {
    if (!is_punct(p)) syntax(peek(), "expected '" + std::string(p) + "'");
    ++pos_;
  }
  std::string name() {
    if (peek().type != Tok::Name) syntax(peek(), "expected identifier");
    return next().text;
  }
  std::uint32_t width_suffix() {
    if (!is_punct(":")) return 32;
    ++pos_;
    const Token t = next();
    std::uint32_t w = 0;
    if (t.type == Tok::Name && t.text.size() > 1 && t.text[0] == 'i') {
      try {
        w = static_cast<std::uint32_t>(std::stoul(t.text.substr(1)));
      } catch (const std::exception &) {
        w = 0;
      }
    }
    if (!ops::is_valid_width(w)) syntax(t, "expected width i8, i16, i32 or i64");
    return w;
  }

  void define(const std::string &n, const Token &at) {
    if (!defined_.insert(n).second)
      throw ParseError(ErrorKind::SsaRedefinition, "value '" + n + "' redefined", at.line, at.column);
  }

  Operand operand() {
    const Token t = peek();
    if (t.type == Tok::Int) {
      ++pos_;
      return Operand::constant(t.value);
    }
    if (t.type == Tok::Name) {
      ++pos_;
      uses_.push_back({t.text, t});
      return Operand::value(t.text);
    }
    syntax(t, "expected operand");
  }

  void meta(Instruction &inst) {
    while (is_punct("!")) {
      ++pos_;
      const Token key = next();
      if (key.type != Tok::Name || key.text != "line") syntax(key, "expected 'line' after '!'");
      const Token v = next();
      if (v.type != Tok::Int || v.value < 0) syntax(v, "expected nonnegative line number");
      inst.lines.push_back(static_cast<std::uint32_t>(v.value));
    }
  }

  void check_arity(const Instruction &inst, const Token &at) {
    const auto want = ops::fixed_arity(inst.op());
    if (want && inst.operands.size() != *want)
      throw ParseError(ErrorKind::Arity,
                       std::string(ops::name(inst.op())) + " expects " + std::to_string(*want) + " operands, got " +
                           std::to_string(inst.operands.size()),
                       at.line, at.column);
  }

  IrFunction function() {
    const Token kw = next();
    if (kw.type != Tok::Name || kw.text != "fn") syntax(kw, "expected 'fn'");
    IrFunction f;
    f.name = name();
    defined_.clear();
    uses_.clear();
    target_uses_.clear();
    expect("(");
    if (!is_punct(")")) {
      for (;;) {
        const Token at = peek();
        Param p;
        p.name = name();
        p.width = width_suffix();
        define(p.name, at);
        f.params.push_back(std::move(p));
        if (!is_punct(",")) break;
        ++pos_;
      }
    }
    expect(")");
    expect("{");
    std::set<std::string> labels;
    while (!is_punct("}")) {
      const Token at = peek();
      auto b = block();
      if (!labels.insert(b.label).second)
        throw ParseError(ErrorKind::InvalidModule, "duplicate block label '" + b.label + "'", at.line, at.column);
      f.blocks.push_back(std::move(b));
    }
    expect("}");
    if (f.blocks.empty()) syntax(kw, "function '" + f.name + "' has no blocks");
    for (const auto &u : uses_)
      if (!defined_.count(u.name))
        throw ParseError(ErrorKind::InvalidModule, "use of undefined value '" + u.name + "'", u.at.line, u.at.column);
    for (const auto &u : target_uses_)
      if (!labels.count(u.name))
        throw ParseError(ErrorKind::InvalidModule, "unknown block '" + u.name + "'", u.at.line, u.at.column);
    return f;
  }

  BasicBlock block() {
    BasicBlock b;
    b.label = name();
    expect(":");
    for (;;) {
      const Token head = peek();
      if (head.type != Tok::Name) syntax(head, "expected instruction or terminator");
      if (head.text == "br" || head.text == "condbr" || head.text == "ret") {
        b.terminator = terminator();
        if (is_punct(";")) ++pos_;
        return b;
      }
      b.instructions.push_back(instruction());
      expect(";");
    }
  }

  Instruction terminator() {
    const Token kw = next();
    Instruction t;
    t.kind.op = *ops::opcode_from_name(kw.text);
    if (t.op() == Opcode::Br) {
      target(t);
    } else if (t.op() == Opcode::CondBr) {
      t.operands.push_back(operand());
      expect(",");
      target(t);
      expect(",");
      target(t);
    } else if (peek().type == Tok::Name || peek().type == Tok::Int) {
      t.operands.push_back(operand());
    }
    meta(t);
    return t;
  }

  void target(Instruction &t) {
    const Token at = peek();
    t.targets.push_back(name());
    target_uses_.push_back({t.targets.back(), at});
  }

  Instruction instruction() {
    const Token head = peek();
    Instruction inst;
    if (head.text == "store") {
      ++pos_;
      inst.kind.op = Opcode::Store;
      inst.width = width_suffix();
      inst.operands.push_back(operand());
      expect(",");
      inst.operands.push_back(operand());
      meta(inst);
      check_arity(inst, head);
      return inst;
    }
    if (head.text == "hwcall") return hwcall();

    const Token res = next();
    expect("=");
    const Token opt = peek();
    if (opt.type != Tok::Name) syntax(opt, "expected opcode");
    ++pos_;
    auto op = ops::opcode_from_name(opt.text);
    if (!op || ops::is_terminator(*op) || *op == Opcode::Store || *op == Opcode::In || *op == Opcode::Out ||
        *op == Opcode::HwCall)
      throw ParseError(ErrorKind::UnknownOpcode, "unknown opcode '" + opt.text + "'", opt.line, opt.column);
    inst.kind.op = *op;
    inst.width = width_suffix();
    if (*op == Opcode::Icmp) {
      const Token p = next();
      auto pred = p.type == Tok::Name ? ops::pred_from_name(p.text) : std::nullopt;
      if (!pred) syntax(p, "expected icmp predicate");
      inst.kind.pred = *pred;
    }
    if (*op == Opcode::Phi) {
      for (;;) {
        inst.operands.push_back(operand());
        expect(",");
        target(inst);
        if (!is_punct(",")) break;
        ++pos_;
      }
    } else if (!is_punct(";") && !is_punct("!")) {
      for (;;) {
        inst.operands.push_back(operand());
        if (!is_punct(",")) break;
        ++pos_;
      }
    }
    meta(inst);
    check_arity(inst, opt);
    if (*op == Opcode::Const && !inst.operands[0].is_literal()) syntax(opt, "const expects an integer literal");
    define(res.text, res);
    inst.results.push_back(res.text);
    return inst;
  }

  Instruction hwcall() {
    ++pos_;
    Instruction inst;
    inst.kind.op = Opcode::HwCall;
    const Token k = next();
    if (k.type != Tok::Name || k.text.size() < 2 || k.text[0] != 'k') syntax(k, "expected kernel id k<N>");
    try {
      inst.kernel = static_cast<std::uint32_t>(std::stoul(k.text.substr(1)));
    } catch (const std::exception &) {
      syntax(k, "expected kernel id k<N>");
    }
    expect("(");
    if (!is_punct(")")) {
      for (;;) {
        inst.operands.push_back(operand());
        if (!is_punct(",")) break;
        ++pos_;
      }
    }
    expect(")");
    expect("->");
    expect("(");
    if (!is_punct(")")) {
      for (;;) {
        const Token at = peek();
        auto r = name();
        define(r, at);
        inst.results.push_back(std::move(r));
        if (!is_punct(",")) break;
        ++pos_;
      }
    }
    expect(")");
    meta(inst);
    return inst;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::set<std::string> defined_;
  std::vector<Use> uses_;
  std::vector<Use> target_uses_;
};

inline void print_operand(std::ostream &os, const Operand &o) {
  if (o.is_literal())
    os << o.literal;
  else
    os << o.name;
}

inline void print_lines(std::ostream &os, const Instruction &inst) {
  for (auto l : inst.lines) os << " !line " << l;
}

inline void print_width(std::ostream &os, std::uint32_t w) {
  if (w != 32) os << ":i" << w;
}

} // namespace detail

// Parses IR source text. Throws ParseError with a distinct kind for syntax
// errors, SSA redefinitions, arity mismatches and unknown opcodes.
inline IrModule parse_ir(std::string_view text, std::string module_name = "module") {
  IrModule m = detail::Parser(text).module();
  m.name = std::move(module_name);
  return m;
}

inline void print_instruction(std::ostream &os, const Instruction &inst) {
  using detail::print_operand;
  switch (inst.op()) {
  case Opcode::Br:
    os << "br " << inst.targets[0];
    break;
  case Opcode::CondBr:
    os << "condbr ";
    print_operand(os, inst.operands[0]);
    os << ", " << inst.targets[0] << ", " << inst.targets[1];
    break;
  case Opcode::Ret:
    os << "ret";
    if (!inst.operands.empty()) {
      os << ' ';
      print_operand(os, inst.operands[0]);
    }
    break;
  case Opcode::Store:
    os << "store";
    detail::print_width(os, inst.width);
    os << ' ';
    print_operand(os, inst.operands[0]);
    os << ", ";
    print_operand(os, inst.operands[1]);
    break;
  case Opcode::HwCall:
    os << "hwcall k" << inst.kernel << '(';
    for (std::size_t i = 0; i < inst.operands.size(); ++i) {
      if (i) os << ", ";
      print_operand(os, inst.operands[i]);
    }
    os << ") -> (";
    for (std::size_t i = 0; i < inst.results.size(); ++i) os << (i ? ", " : "") << inst.results[i];
    os << ')';
    break;
  default:
    os << inst.result() << " = " << ops::name(inst.op());
    detail::print_width(os, inst.width);
    if (inst.kind.pred != Pred::None) os << ' ' << ops::name(inst.kind.pred);
    for (std::size_t i = 0; i < inst.operands.size(); ++i) {
      os << (i ? ", " : " ");
      print_operand(os, inst.operands[i]);
      if (inst.op() == Opcode::Phi) os << ", " << inst.targets[i];
    }
  }
  detail::print_lines(os, inst);
}

inline std::string print_ir(const IrModule &m) {
  std::ostringstream os;
  for (std::size_t fi = 0; fi < m.functions.size(); ++fi) {
    const auto &f = m.functions[fi];
    if (fi) os << '\n';
    os << "fn " << f.name << '(';
    for (std::size_t i = 0; i < f.params.size(); ++i) {
      if (i) os << ", ";
      os << f.params[i].name;
      detail::print_width(os, f.params[i].width);
    }
    os << ") {\n";
    for (const auto &b : f.blocks) {
      os << b.label << ":\n";
      for (const auto &inst : b.instructions) {
        os << "  ";
        print_instruction(os, inst);
        os << ";\n";
      }
      os << "  ";
      print_instruction(os, b.terminator);
      os << ";\n";
    }
    os << "}\n";
  }
  return os.str();
}

// Width of every named value in a function (params and results).
inline std::map<std::string, std::uint32_t> value_widths(const IrFunction &f) {
  std::map<std::string, std::uint32_t> w;
  for (const auto &p : f.params) w[p.name] = p.width;
  for (const auto &b : f.blocks)
    for (const auto &inst : b.instructions)
      for (const auto &r : inst.results) w[r] = inst.op() == Opcode::Icmp ? 1 : inst.width;
  return w;
}

} // namespace overlayforge::ir
