#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "overlayforge/common.hpp"

namespace overlayforge {

// Declaration order is the label collation order used by the standalone
// canonical-code machinery; do not reorder.
enum class Opcode : std::uint8_t {
  Add,
  Sub,
  Mul,
  Div,
  And,
  Or,
  Xor,
  Shl,
  Shr,
  Icmp,
  Select,
  Load,
  Store,
  Zext,
  Sext,
  Trunc,
  Br,
  CondBr,
  Ret,
  Phi,
  Const,
  // Pseudo operations introduced by the toolchain.
  Demux,
  Register,
  HwCall,
  In,
  Out,
};

inline constexpr std::size_t kOpcodeCount = static_cast<std::size_t>(Opcode::Out) + 1;

enum class Pred : std::uint8_t { None, Eq, Ne, Slt, Sle, Sgt, Sge, Ult, Ule, Ugt, Uge };

struct OpKind {
  Opcode op = Opcode::Add;
  Pred pred = Pred::None;
  friend bool operator==(const OpKind &, const OpKind &) = default;
};

namespace ops {

inline constexpr std::array<std::string_view, kOpcodeCount> kOpcodeNames = {
    "add", "sub",   "mul",  "div",   "and",  "or",   "xor",    "shl",
    "shr", "icmp",  "select", "load", "store", "zext", "sext", "trunc",
    "br",  "condbr", "ret", "phi",   "const", "demux", "register", "hwcall",
    "in",  "out"};

inline constexpr std::array<std::string_view, 11> kPredNames = {
    "", "eq", "ne", "slt", "sle", "sgt", "sge", "ult", "ule", "ugt", "uge"};

inline constexpr bool is_valid_width(std::uint32_t w) { return w == 8 || w == 16 || w == 32 || w == 64; }

inline std::string_view name(Opcode op) { return kOpcodeNames[static_cast<std::size_t>(op)]; }
inline std::string_view name(Pred p) { return kPredNames[static_cast<std::size_t>(p)]; }

inline std::optional<Opcode> opcode_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kOpcodeCount; ++i)
    if (kOpcodeNames[i] == s) return static_cast<Opcode>(i);
  return std::nullopt;
}

inline std::optional<Pred> pred_from_name(std::string_view s) {
  for (std::size_t i = 1; i < kPredNames.size(); ++i)
    if (kPredNames[i] == s) return static_cast<Pred>(i);
  return std::nullopt;
}

inline bool is_terminator(Opcode op) { return op == Opcode::Br || op == Opcode::CondBr || op == Opcode::Ret; }

inline bool is_binary(Opcode op) {
  switch (op) {
  case Opcode::Add: case Opcode::Sub: case Opcode::Mul: case Opcode::Div:
  case Opcode::And: case Opcode::Or: case Opcode::Xor: case Opcode::Shl:
  case Opcode::Shr: case Opcode::Icmp:
    return true;
  default:
    return false;
  }
}

inline bool is_conversion(Opcode op) { return op == Opcode::Zext || op == Opcode::Sext || op == Opcode::Trunc; }

// Compute operations with a hardware primitive (what survives pruning).
inline bool is_mappable(Opcode op) { return is_binary(op) || op == Opcode::Select; }

// Fixed operand count, or nullopt for variadic forms (phi, hwcall, demux).
inline std::optional<std::size_t> fixed_arity(Opcode op) {
  if (is_binary(op)) return 2;
  switch (op) {
  case Opcode::Select: return 3;
  case Opcode::Store: return 2;
  case Opcode::Load: case Opcode::Zext: case Opcode::Sext: case Opcode::Trunc:
  case Opcode::Const: case Opcode::Register: case Opcode::Out:
    return 1;
  case Opcode::In: return 0;
  default: return std::nullopt;
  }
}

// Modeling defaults. add = 1 and mul = 6 cycles are the anchored values; the
// rest are configurable assumptions carried by the primitive library.
inline std::uint32_t default_latency(Opcode op, std::uint32_t width = 32) {
  switch (op) {
  case Opcode::Mul: return 6;
  case Opcode::Div: return width <= 16 ? 8 : 12;
  case Opcode::Zext: case Opcode::Sext: case Opcode::Trunc:
  case Opcode::In: case Opcode::Out: case Opcode::Const:
    return 0;
  default: return 1;
  }
}

inline constexpr std::uint64_t mask(std::uint64_t v, std::uint32_t width) {
  return width >= 64 ? v : (v & ((std::uint64_t{1} << width) - 1));
}

inline constexpr std::int64_t to_signed(std::uint64_t v, std::uint32_t width) {
  v = mask(v, width);
  if (width < 64 && (v >> (width - 1)) & 1u) return static_cast<std::int64_t>(v | ~((std::uint64_t{1} << width) - 1));
  return static_cast<std::int64_t>(v);
}

inline bool compare(Pred p, std::uint64_t a, std::uint64_t b, std::uint32_t width) {
  const auto sa = to_signed(a, width), sb = to_signed(b, width);
  a = mask(a, width);
  b = mask(b, width);
  switch (p) {
  case Pred::Eq: return a == b;
  case Pred::Ne: return a != b;
  case Pred::Slt: return sa < sb;
  case Pred::Sle: return sa <= sb;
  case Pred::Sgt: return sa > sb;
  case Pred::Sge: return sa >= sb;
  case Pred::Ult: return a < b;
  case Pred::Ule: return a <= b;
  case Pred::Ugt: return a > b;
  case Pred::Uge: return a >= b;
  case Pred::None: break;
  }
  fail(ErrorKind::Internal, "icmp without predicate");
}

// Sticky status raised by operations with a defined-but-exceptional result.
struct EvalFlags {
  bool div_by_zero = false;
};

// The single integer semantics shared by the IR interpreter, the DFG
// interpreter, the primitive library and the netlist simulator.
// Two's-complement wraparound at `width`; operands are masked to `width`
// (conversions use `source_width` for their operand).
inline std::uint64_t evaluate(OpKind kind, std::uint32_t width, std::span<const std::uint64_t> in,
                              EvalFlags *flags = nullptr, std::uint32_t source_width = 32) {
  auto arg = [&](std::size_t i) { return mask(in[i], width); };
  switch (kind.op) {
  case Opcode::Add: return mask(arg(0) + arg(1), width);
  case Opcode::Sub: return mask(arg(0) - arg(1), width);
  case Opcode::Mul: return mask(arg(0) * arg(1), width);
  case Opcode::Div: {
    const auto b = to_signed(arg(1), width);
    if (b == 0) {
      if (flags) flags->div_by_zero = true;
      return 0;
    }
    const auto a = to_signed(arg(0), width);
    // INT_MIN / -1 wraps back to INT_MIN.
    if (b == -1) return mask(std::uint64_t{0} - static_cast<std::uint64_t>(a), width);
    return mask(static_cast<std::uint64_t>(a / b), width);
  }
  case Opcode::And: return arg(0) & arg(1);
  case Opcode::Or: return arg(0) | arg(1);
  case Opcode::Xor: return arg(0) ^ arg(1);
  case Opcode::Shl: return arg(1) >= width ? 0 : mask(arg(0) << arg(1), width);
  case Opcode::Shr: return arg(1) >= width ? 0 : arg(0) >> arg(1);
  case Opcode::Icmp: return compare(kind.pred, in[0], in[1], width) ? 1 : 0;
  case Opcode::Select: return (in[0] & 1) ? arg(1) : arg(2); // 1-bit condition pin
  case Opcode::Zext: return mask(mask(in[0], source_width), width);
  case Opcode::Sext: return mask(static_cast<std::uint64_t>(to_signed(in[0], source_width)), width);
  case Opcode::Trunc: return arg(0);
  case Opcode::Register: case Opcode::Out: return arg(0);
  default: break;
  }
  fail(ErrorKind::Unsupported, "no evaluation semantics for '", name(kind.op), "'");
}

} // namespace ops

// A vertex label: opcode (+ predicate) and bit width, printed as a single
// token such as "add", "icmp.sgt" or "mul:i16" (width suffix only when != 32).
struct OpLabel {
  OpKind kind;
  std::uint32_t width = 32;
  friend bool operator==(const OpLabel &, const OpLabel &) = default;
};

inline std::string format_label(const OpLabel &l) {
  std::string s(ops::name(l.kind.op));
  if (l.kind.pred != Pred::None) {
    s += '.';
    s += ops::name(l.kind.pred);
  }
  if (l.width != 32) s += ":i" + std::to_string(l.width);
  return s;
}

inline std::optional<OpLabel> parse_label(std::string_view s) {
  OpLabel out;
  if (auto colon = s.find(':'); colon != std::string_view::npos) {
    auto w = s.substr(colon + 1);
    if (w.size() < 2 || w[0] != 'i') return std::nullopt;
    std::uint32_t width = 0;
    for (char c : w.substr(1)) {
      if (c < '0' || c > '9') return std::nullopt;
      width = width * 10 + static_cast<std::uint32_t>(c - '0');
    }
    if (!ops::is_valid_width(width)) return std::nullopt;
    out.width = width;
    s = s.substr(0, colon);
  }
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    auto p = ops::pred_from_name(s.substr(dot + 1));
    if (!p) return std::nullopt;
    out.kind.pred = *p;
    s = s.substr(0, dot);
  }
  auto op = ops::opcode_from_name(s);
  if (!op) return std::nullopt;
  if ((*op == Opcode::Icmp) != (out.kind.pred != Pred::None)) return std::nullopt;
  out.kind.op = *op;
  return out;
}

// Default collation key: opcode-table index, then predicate, then width.
inline std::uint32_t collation_key(const OpLabel &l) {
  return (static_cast<std::uint32_t>(l.kind.op) << 16) | (static_cast<std::uint32_t>(l.kind.pred) << 8) |
         static_cast<std::uint32_t>(l.width);
}

} // namespace overlayforge
