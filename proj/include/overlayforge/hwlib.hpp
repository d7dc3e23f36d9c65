#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "overlayforge/common.hpp"
#include "overlayforge/ops.hpp"

namespace overlayforge::hwlib {

using json = nlohmann::ordered_json;

inline constexpr std::uint32_t kWidths[] = {8, 16, 32, 64};

inline bool is_library_opcode(Opcode op) {
  return ops::is_mappable(op) || op == Opcode::Demux || op == Opcode::Register;
}

struct PortSpec {
  std::string name;
  bool input = true;
  std::uint32_t width = 32;
};

struct Primitive {
  Opcode opcode = Opcode::Add;
  std::uint32_t width = 32;
  std::uint32_t latency = 1;
  std::uint32_t ii = 1;
  Resources resources; // demux: per data lane

  std::string name() const { return std::string(ops::name(opcode)) + std::to_string(width); }

  // Operand ports then the result; demux is listed with one data lane.
  std::vector<PortSpec> ports() const {
    std::vector<PortSpec> p;
    const auto n = opcode == Opcode::Demux ? 2 : ops::fixed_arity(opcode).value_or(0);
    for (std::size_t i = 0; i < n; ++i) {
      const bool cond = (opcode == Opcode::Select || opcode == Opcode::Demux) && i == 0;
      p.push_back({"in" + std::to_string(i), true, cond ? 1u : width});
    }
    if (opcode == Opcode::Demux) {
      p.push_back({"out_t", false, width});
      p.push_back({"out_f", false, width});
    } else {
      p.push_back({"out", false, opcode == Opcode::Icmp ? 1u : width});
    }
    return p;
  }

  std::uint64_t behave(Pred pred, std::span<const std::uint64_t> in, ops::EvalFlags *flags = nullptr) const {
    return ops::evaluate({opcode, pred}, width, in, flags);
  }

  friend bool operator==(const Primitive &, const Primitive &) = default;
};

class PrimitiveLibrary {
public:
  std::string name = "default";
  std::string version = "1";

  void add(const Primitive &p) {
    if (!is_library_opcode(p.opcode))
      fail(ErrorKind::Library, "opcode '", ops::name(p.opcode), "' has no hardware primitive form");
    if (!entries_.emplace(std::make_pair(p.opcode, p.width), p).second)
      fail(ErrorKind::Library, "duplicate primitive ", p.name());
    order_.push_back({p.opcode, p.width});
  }

  const Primitive *find(Opcode op, std::uint32_t width) const {
    auto it = entries_.find({op, width});
    return it == entries_.end() ? nullptr : &it->second;
  }

  // Every mappable opcode plus demux and register at every supported width.
  void validate() const {
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < kOpcodeCount; ++i) {
      const auto op = static_cast<Opcode>(i);
      if (!is_library_opcode(op)) continue;
      for (auto w : kWidths)
        if (!find(op, w)) missing.push_back(std::string(ops::name(op)) + std::to_string(w));
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto &m : missing) list += (list.empty() ? "" : ", ") + m;
      fail(ErrorKind::Library, "library '", name, "' lacks mandatory primitives: ", list);
    }
    for (const auto &[key, p] : entries_)
      if (p.ii < 1) fail(ErrorKind::Library, p.name(), ": initiation interval must be at least 1");
    const auto *reg = find(Opcode::Register, 32);
    if (reg->latency != 1) fail(ErrorKind::Library, "register primitive must have latency 1");
  }

  std::vector<Primitive> primitives() const {
    std::vector<Primitive> out;
    for (const auto &k : order_) out.push_back(entries_.at(k));
    return out;
  }

private:
  std::map<std::pair<Opcode, std::uint32_t>, Primitive> entries_;
  std::vector<std::pair<Opcode, std::uint32_t>> order_;
};

inline const Primitive &lookup(const PrimitiveLibrary &lib, Opcode op, std::uint32_t width) {
  if (const auto *p = lib.find(op, width)) return *p;
  fail(ErrorKind::Unsupported, "library '", lib.name, "' has no primitive for ", ops::name(op), " at ", width,
       " bits");
}

inline const Primitive &lookup(const PrimitiveLibrary &lib, std::string_view opcode, std::uint32_t width) {
  auto op = ops::opcode_from_name(opcode);
  if (!op || !is_library_opcode(*op))
    fail(ErrorKind::Unsupported, "opcode '", opcode, "' is not supported by the primitive library");
  return lookup(lib, *op, width);
}

inline std::uint32_t log2_ceil(std::uint32_t w) {
  std::uint32_t k = 0;
  while ((1u << k) < w) ++k;
  return k;
}

// Modeling defaults. Only add = 1 / mul = 6 cycles and 4 DSPs for a 32-bit
// multiplier are anchored; everything else is a relative-cost assumption.
inline Primitive default_primitive(Opcode op, std::uint32_t w) {
  Primitive p;
  p.opcode = op;
  p.width = w;
  p.latency = ops::default_latency(op, w);
  switch (op) {
  case Opcode::Add: case Opcode::Sub: case Opcode::And: case Opcode::Or: case Opcode::Xor: case Opcode::Select:
    p.resources = {w, w, 0, 0};
    break;
  case Opcode::Shl: case Opcode::Shr: p.resources = {w * log2_ceil(w) / 2, w, 0, 0}; break;
  case Opcode::Icmp: p.resources = {w / 2, 1, 0, 0}; break;
  case Opcode::Mul: {
    const std::uint64_t dsp = w <= 16 ? 1 : w == 32 ? 4 : 16;
    p.resources = {0, 0, dsp, 0};
    break;
  }
  case Opcode::Div: p.resources = {std::uint64_t{w} * w, std::uint64_t{w} * p.latency, 0, 0}; break;
  case Opcode::Demux: p.resources = {w, 0, 0, 0}; break;
  case Opcode::Register: p.resources = {0, w, 0, 0}; break;
  default: fail(ErrorKind::Library, "no default primitive for '", ops::name(op), "'");
  }
  return p;
}

inline PrimitiveLibrary default_library() {
  PrimitiveLibrary lib;
  lib.name = "overlayforge-default";
  lib.version = "1.0";
  for (std::size_t i = 0; i < kOpcodeCount; ++i) {
    const auto op = static_cast<Opcode>(i);
    if (!is_library_opcode(op)) continue;
    for (auto w : kWidths) lib.add(default_primitive(op, w));
  }
  return lib;
}

inline json to_json(const PrimitiveLibrary &lib) {
  json j;
  j["name"] = lib.name;
  j["version"] = lib.version;
  j["primitives"] = json::array();
  for (const auto &p : lib.primitives())
    j["primitives"].push_back({{"opcode", ops::name(p.opcode)},
                               {"width", p.width},
                               {"latency", p.latency},
                               {"ii", p.ii},
                               {"resources",
                                {{"lut", p.resources.lut},
                                 {"ff", p.resources.ff},
                                 {"dsp", p.resources.dsp},
                                 {"bram", p.resources.bram}}}});
  return j;
}

inline std::string save_library(const PrimitiveLibrary &lib) { return to_json(lib).dump(2) + "\n"; }

inline PrimitiveLibrary parse_library(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception &e) {
    fail(ErrorKind::Library, "malformed library file: ", e.what());
  }
  try {
    PrimitiveLibrary lib;
    lib.name = j.at("name").get<std::string>();
    lib.version = j.at("version").get<std::string>();
    for (const auto &e : j.at("primitives")) {
      const auto opname = e.at("opcode").get<std::string>();
      auto op = ops::opcode_from_name(opname);
      if (!op) fail(ErrorKind::Library, "unknown opcode '", opname, "' in library");
      auto nonneg = [&](const json &v, const char *what) {
        if (!v.is_number_integer()) fail(ErrorKind::Library, opname, ": '", what, "' must be an integer");
        const auto x = v.get<std::int64_t>();
        if (x < 0) fail(ErrorKind::Library, opname, ": negative ", what);
        return static_cast<std::uint64_t>(x);
      };
      Primitive p;
      p.opcode = *op;
      p.width = static_cast<std::uint32_t>(nonneg(e.at("width"), "width"));
      if (!ops::is_valid_width(p.width)) fail(ErrorKind::Library, opname, ": unsupported width ", p.width);
      p.latency = static_cast<std::uint32_t>(nonneg(e.at("latency"), "latency"));
      p.ii = e.contains("ii") ? static_cast<std::uint32_t>(nonneg(e.at("ii"), "ii")) : 1;
      const auto &r = e.at("resources");
      p.resources = {nonneg(r.at("lut"), "lut"), nonneg(r.at("ff"), "ff"), nonneg(r.at("dsp"), "dsp"),
                     nonneg(r.at("bram"), "bram")};
      lib.add(p);
    }
    lib.validate();
    return lib;
  } catch (const json::exception &e) {
    fail(ErrorKind::Library, "malformed library file: ", e.what());
  }
}

inline PrimitiveLibrary load_library(const std::string &path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read library '", path, "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_library(ss.str());
}

} // namespace overlayforge::hwlib
