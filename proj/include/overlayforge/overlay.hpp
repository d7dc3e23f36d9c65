#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "overlayforge/merge.hpp"
#include "overlayforge/netlist.hpp"

namespace overlayforge::stitch {

inline Netlist stitch_kernel(const miner::Kernel &k, const hwlib::PrimitiveLibrary &lib) {
  return stitch_dfg(k.dfg, lib, "k" + std::to_string(k.id));
}

inline Netlist stitch_kernel(const miner::MergedKernel &k, const hwlib::PrimitiveLibrary &lib) {
  std::string name = "m" + std::to_string(k.id);
  for (auto id : k.kernel_ids) name += "_k" + std::to_string(id);
  return stitch_dfg(k.dfg, lib, name);
}

inline constexpr std::uint32_t kChannelBits = 32;
inline constexpr std::uint32_t kDefaultQueueDepth = 16;
// Cycles a PE adds around its core: input queue, input register, output register.
inline constexpr std::uint32_t kPeLatencyOverhead = 3;

inline std::uint32_t channels_for(const std::vector<Port> &ports) {
  std::uint32_t n = 0;
  for (const auto &p : ports) n += (p.width + kChannelBits - 1) / kChannelBits;
  return n;
}

struct PeModel {
  std::uint32_t in_channels = 0;
  std::uint32_t out_channels = 0;
  std::uint32_t in_queue_depth = kDefaultQueueDepth;
  std::uint32_t out_queue_depth = kDefaultQueueDepth;
  std::uint32_t control_latency = 0;
  std::optional<Netlist> core; // empty: black-box

  bool blackbox() const { return !core.has_value(); }

  // Input/output registers per channel, one config register, queue storage
  // and a small controller.
  Resources overhead() const {
    Resources r;
    r.ff = std::uint64_t{kChannelBits} * (in_channels + out_channels + 1) +
           std::uint64_t{kChannelBits} * (std::uint64_t{in_channels} * in_queue_depth + std::uint64_t{out_channels} * out_queue_depth);
    r.lut = 24 + 8 * std::uint64_t{in_channels + out_channels};
    return r;
  }
  Resources total() const { return overhead() + (core ? core->resources : Resources{}); }
  std::uint32_t latency() const { return control_latency + kPeLatencyOverhead; }
  friend bool operator==(const PeModel &, const PeModel &) = default;
};

inline PeModel wrap_pe(const Netlist &core, std::uint32_t queue_depth = kDefaultQueueDepth) {
  if (queue_depth < 1) fail(ErrorKind::InvalidGraph, "queue depth must be at least 1");
  PeModel pe;
  pe.in_channels = channels_for(core.inputs);
  pe.out_channels = channels_for(core.outputs);
  pe.in_queue_depth = pe.out_queue_depth = queue_depth;
  pe.control_latency = core.latency;
  pe.core = core;
  return pe;
}

// The regular-overlay comparison PE: every mappable 32-bit primitive behind
// an operation-select mux tree, three operand channels and one result.
struct AluModel {
  Resources core;
  std::map<Opcode, std::uint32_t> latency;
  PeModel pe;
};

inline AluModel generic_alu(const hwlib::PrimitiveLibrary &lib, std::uint32_t queue_depth = kDefaultQueueDepth) {
  AluModel a;
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < kOpcodeCount; ++i) {
    const auto op = static_cast<Opcode>(i);
    if (!ops::is_mappable(op)) continue;
    const auto &p = hwlib::lookup(lib, op, 32);
    a.core += p.resources;
    a.latency[op] = p.latency;
    ++n;
  }
  a.core.lut += std::uint64_t{kChannelBits} * (n - 1); // 2:1 mux tree over n results
  a.core.ff += 8;                                       // opcode register
  a.pe.in_channels = 3;
  a.pe.out_channels = 1;
  a.pe.in_queue_depth = a.pe.out_queue_depth = queue_depth;
  return a;
}

struct OverlayModel {
  std::uint32_t rows = 1;
  std::uint32_t cols = 1;
  std::uint32_t queue_depth = kDefaultQueueDepth;
  std::vector<PeModel> slots;              // row-major
  std::map<std::string, std::string> kernel; // slot name -> kernel name, assigned slots only

  std::size_t size() const { return slots.size(); }
  static std::string slot_name(std::uint32_t r, std::uint32_t c) { return std::to_string(r) + "," + std::to_string(c); }
  std::string slot_name(std::size_t index) const {
    return slot_name(static_cast<std::uint32_t>(index / cols), static_cast<std::uint32_t>(index % cols));
  }
  std::optional<std::size_t> slot_index(std::string_view name) const {
    for (std::size_t i = 0; i < slots.size(); ++i)
      if (slot_name(i) == name) return i;
    return std::nullopt;
  }
  friend bool operator==(const OverlayModel &, const OverlayModel &) = default;
};

// All-black-box layout. Channel counts of 0 leave a slot's wiring open.
inline OverlayModel make_overlay(std::uint32_t rows, std::uint32_t cols, std::uint32_t queue_depth = kDefaultQueueDepth) {
  if (rows < 1 || cols < 1) fail(ErrorKind::Slot, "grid must be at least 1x1");
  if (queue_depth < 1) fail(ErrorKind::Slot, "queue depth must be at least 1");
  OverlayModel o;
  o.rows = rows;
  o.cols = cols;
  o.queue_depth = queue_depth;
  PeModel empty;
  empty.in_queue_depth = empty.out_queue_depth = queue_depth;
  o.slots.assign(std::size_t{rows} * cols, empty);
  return o;
}

inline OverlayModel fill_blackboxes(const OverlayModel &overlay, const std::map<std::string, Netlist> &assignments) {
  OverlayModel o = overlay;
  for (const auto &[slot, core] : assignments) {
    const auto idx = o.slot_index(slot);
    if (!idx) fail(ErrorKind::Slot, "no slot '", slot, "' in a ", o.rows, "x", o.cols, " overlay");
    auto &pe = o.slots[*idx];
    const auto in = channels_for(core.inputs), out = channels_for(core.outputs);
    if ((pe.in_channels && pe.in_channels != in) || (pe.out_channels && pe.out_channels != out))
      fail(ErrorKind::Slot, "slot ", slot, " is wired for ", pe.in_channels, " in / ", pe.out_channels, " out channels, ",
           core.name, " needs ", in, " / ", out);
    pe = wrap_pe(core, o.queue_depth);
    o.kernel[slot] = core.name;
  }
  return o;
}

struct FlavorResources {
  Resources total;
  std::vector<Resources> per_pe;
};

struct ResourceReport {
  FlavorResources as;   // application-specific PEs
  FlavorResources alu;  // generic-ALU PEs in every slot
  FlavorResources bare; // kernel cores alone, no PE overhead
};

inline ResourceReport estimate_resources(const OverlayModel &o, const hwlib::PrimitiveLibrary &lib) {
  ResourceReport r;
  const auto alu = generic_alu(lib, o.queue_depth);
  for (const auto &pe : o.slots) {
    const auto as = pe.total();
    const auto bare = pe.core ? pe.core->resources : Resources{};
    const auto g = alu.pe.overhead() + alu.core;
    r.as.per_pe.push_back(as);
    r.alu.per_pe.push_back(g);
    r.bare.per_pe.push_back(bare);
    r.as.total += as;
    r.alu.total += g;
    r.bare.total += bare;
  }
  return r;
}

// ---- serialization ----

inline json pe_to_json(const PeModel &pe) {
  json j;
  j["in_channels"] = pe.in_channels;
  j["out_channels"] = pe.out_channels;
  j["in_queue_depth"] = pe.in_queue_depth;
  j["out_queue_depth"] = pe.out_queue_depth;
  j["control_latency"] = pe.control_latency;
  j["core"] = pe.core ? to_json(*pe.core) : json(nullptr);
  return j;
}

inline json to_json(const OverlayModel &o) {
  json j;
  j["grid"] = {{"rows", o.rows}, {"cols", o.cols}};
  j["queue_depth"] = o.queue_depth;
  j["slots"] = json::object();
  for (std::size_t i = 0; i < o.slots.size(); ++i) {
    auto s = pe_to_json(o.slots[i]);
    auto it = o.kernel.find(o.slot_name(i));
    s["kernel"] = it == o.kernel.end() ? json(nullptr) : json(it->second);
    j["slots"][o.slot_name(i)] = std::move(s);
  }
  return j;
}

inline std::string save_overlay(const OverlayModel &o) { return to_json(o).dump(2) + "\n"; }

inline OverlayModel parse_overlay(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception &e) {
    fail(ErrorKind::Syntax, "malformed overlay: ", e.what());
  }
  try {
    auto o = make_overlay(j.at("grid").at("rows").get<std::uint32_t>(), j.at("grid").at("cols").get<std::uint32_t>(),
                          j.value("queue_depth", kDefaultQueueDepth));
    if (j.contains("slots"))
      for (const auto &[name, s] : j.at("slots").items()) {
        const auto idx = o.slot_index(name);
        if (!idx) fail(ErrorKind::Slot, "overlay names slot '", name, "' outside its grid");
        auto &pe = o.slots[*idx];
        pe.in_channels = s.value("in_channels", 0u);
        pe.out_channels = s.value("out_channels", 0u);
        pe.in_queue_depth = s.value("in_queue_depth", o.queue_depth);
        pe.out_queue_depth = s.value("out_queue_depth", o.queue_depth);
        pe.control_latency = s.value("control_latency", 0u);
        if (s.contains("core") && !s.at("core").is_null()) {
          pe.core = netlist_from_json(s.at("core"));
          if (pe.control_latency != pe.core->latency) fail(ErrorKind::Syntax, "slot ", name, ": control latency differs from core latency");
        }
        if (s.contains("kernel") && !s.at("kernel").is_null()) o.kernel[name] = s.at("kernel").get<std::string>();
        if (o.kernel.count(name) && !pe.core) fail(ErrorKind::Syntax, "slot ", name, " is assigned but has no core");
      }
    return o;
  } catch (const json::exception &e) {
    fail(ErrorKind::Syntax, "malformed overlay: ", e.what());
  }
}

} // namespace overlayforge::stitch
