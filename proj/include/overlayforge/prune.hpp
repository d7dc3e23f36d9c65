#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "overlayforge/dfg.hpp"

namespace overlayforge::miner {

enum class PruneRole { Keep, Source, Sink, Bypass };

// Loads, phis and (already rewritten) hwcalls produce values the fabric
// receives from outside; stores consume them; conversions are plain wiring.
inline PruneRole prune_role(Opcode op) {
  switch (op) {
  case Opcode::Load: case Opcode::Phi: case Opcode::HwCall: return PruneRole::Source;
  case Opcode::Store: return PruneRole::Sink;
  case Opcode::Zext: case Opcode::Sext: case Opcode::Trunc: return PruneRole::Bypass;
  default: return PruneRole::Keep;
  }
}

struct PruneResult {
  graph::Dfg dfg;
  std::vector<std::size_t> kept;     // new vertex -> original vertex
  std::vector<std::size_t> bypassed; // original ids of conversions wired through
};

// Removes memory and non-compute vertices. A consumer of a load/phi gets an
// external input tagged "v<id>" (the removed vertex); a stored value becomes
// an external output; conversions are bypassed keeping the consumer's port.
// Kept vertices whose result is no longer consumed become outputs.
inline PruneResult prune(const graph::Dfg &g) {
  struct Driver {
    bool internal = false;
    std::size_t src = 0;
    std::uint32_t src_port = 0;
    std::string tag;
  };
  std::map<std::pair<std::size_t, std::uint32_t>, Driver> drivers;
  for (const auto &e : g.edges) drivers[{e.dst, e.port}] = {true, e.src, e.src_port, {}};
  for (const auto &in : g.ext_inputs) drivers[{in.dst, in.port}] = {false, 0, 0, in.tag};

  auto role = [&](std::size_t v) { return prune_role(g.vertices[v].op.kind.op); };
  std::set<std::size_t> bypassed;
  auto resolve = [&](auto &&self, Driver d) -> Driver {
    if (!d.internal) return d;
    switch (role(d.src)) {
    case PruneRole::Keep: return d;
    case PruneRole::Bypass: {
      bypassed.insert(d.src);
      auto it = drivers.find({d.src, 0});
      if (it == drivers.end()) fail(ErrorKind::InvalidGraph, "conversion vertex ", d.src, " has no operand");
      return self(self, it->second);
    }
    default: {
      std::string tag = "v" + std::to_string(d.src);
      if (d.src_port) tag += ".o" + std::to_string(d.src_port);
      return {false, 0, 0, tag};
    }
    }
  };

  PruneResult r;
  std::vector<std::size_t> new_id(g.size(), SIZE_MAX);
  for (std::size_t v = 0; v < g.size(); ++v)
    if (role(v) == PruneRole::Keep) {
      new_id[v] = r.dfg.add_vertex(g.vertices[v].op, g.vertices[v].arity);
      r.kept.push_back(v);
    }
  for (auto v : r.kept)
    for (std::uint32_t port = 0; port < g.vertices[v].arity; ++port) {
      auto it = drivers.find({v, port});
      if (it == drivers.end()) continue;
      const auto d = resolve(resolve, it->second);
      if (d.internal)
        r.dfg.add_edge(new_id[d.src], new_id[v], port, d.src_port);
      else
        r.dfg.add_input(new_id[v], port, d.tag);
    }

  // outputs keyed by (vertex, result); first tag wins
  std::map<std::pair<std::size_t, std::uint32_t>, std::string> outs;
  auto add_out = [&](const Driver &d, const std::string &tag) {
    if (d.internal) outs.emplace(std::make_pair(new_id[d.src], d.src_port), tag);
  };
  for (const auto &o : g.ext_outputs) add_out(resolve(resolve, Driver{true, o.src, o.src_port, {}}), o.tag);
  for (std::size_t v = 0; v < g.size(); ++v)
    if (role(v) == PruneRole::Sink)
      if (auto it = drivers.find({v, 0}); it != drivers.end())
        add_out(resolve(resolve, it->second), "v" + std::to_string(v));
  std::vector<bool> consumed(r.dfg.size(), false);
  for (const auto &e : r.dfg.edges) consumed[e.src] = true;
  for (std::size_t v = 0; v < r.dfg.size(); ++v) {
    bool has_out = false;
    for (const auto &[key, tag] : outs) has_out |= key.first == v;
    if (!consumed[v] && !has_out) outs.emplace(std::make_pair(v, 0u), "v" + std::to_string(r.kept[v]));
  }
  for (const auto &[key, tag] : outs) r.dfg.add_output(key.first, tag, key.second);
  r.bypassed.assign(bypassed.begin(), bypassed.end());
  return r;
}

inline graph::Dfg prune_graph(const graph::Dfg &g) { return prune(g).dfg; }

} // namespace overlayforge::miner
