#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "overlayforge/dfg.hpp"

namespace overlayforge::stitch {

// Width of the value a vertex produces: comparisons yield one bit.
inline std::uint32_t value_width(const graph::Vertex &v) {
  return v.op.kind.op == Opcode::Icmp ? 1 : v.op.width;
}

// Operand width a vertex expects on `port`; condition ports take one bit.
inline std::uint32_t operand_width(const graph::Vertex &v, std::uint32_t port) {
  const auto op = v.op.kind.op;
  if (port == 0 && (op == Opcode::Select || op == Opcode::Demux)) return 1;
  return v.op.width;
}

enum class DelaySite { Edge, Input, Output };

// A register chain: `cycles` stages of `width` bits on one connection,
// identified by its index into edges / ext_inputs / ext_outputs.
struct Delay {
  DelaySite site = DelaySite::Edge;
  std::size_t index = 0;
  std::uint32_t cycles = 0;
  std::uint32_t width = 32;
};

struct Regularized {
  graph::Dfg dfg; // original vertices first, then one register vertex per stage
  std::vector<std::uint32_t> latency; // per original vertex
  std::vector<std::uint32_t> arrival; // operand arrival time per original vertex
  std::vector<Delay> delays;          // nonzero chains only
  std::uint32_t total_latency = 0;
  std::uint64_t register_stages = 0;
  std::uint64_t register_bits = 0; // sum of cycles * width
};

// Schedules every vertex at the latest arrival among its operands (external
// inputs arrive at 0) and pads early operands with register chains; outputs
// are padded to the kernel latency so all results leave together.
inline Regularized regularize_datapath(const graph::Dfg &g, const std::function<std::uint32_t(std::size_t)> &lat) {
  const auto order = g.topo_order();
  if (!order) fail(ErrorKind::Cyclic, "cannot regularize a cyclic datapath");
  Regularized r;
  r.latency.resize(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) r.latency[v] = lat(v);
  r.arrival.assign(g.size(), 0);
  const auto ins = g.in_edges();
  auto ready = [&](std::size_t v) { return r.arrival[v] + r.latency[v]; };
  for (auto v : *order)
    for (auto e : ins[v]) r.arrival[v] = std::max(r.arrival[v], ready(g.edges[e].src));
  for (const auto &o : g.ext_outputs) r.total_latency = std::max(r.total_latency, ready(o.src));

  r.dfg = g;
  r.dfg.edges.clear();
  r.dfg.ext_inputs.clear();
  r.dfg.ext_outputs.clear();
  // chain from a driver to a sink; returns the vertex/port feeding the sink
  auto chain = [&](std::uint32_t cycles, std::uint32_t width) {
    std::vector<std::size_t> regs;
    for (std::uint32_t i = 0; i < cycles; ++i) regs.push_back(r.dfg.add_vertex(OpLabel{{Opcode::Register}, width}, 1));
    for (std::size_t i = 1; i < regs.size(); ++i) r.dfg.add_edge(regs[i - 1], regs[i], 0);
    return regs;
  };
  auto note = [&](DelaySite site, std::size_t index, std::uint32_t cycles, std::uint32_t width) {
    if (cycles == 0) return;
    r.delays.push_back({site, index, cycles, width});
    r.register_stages += cycles;
    r.register_bits += std::uint64_t{cycles} * width;
  };
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto &e = g.edges[i];
    if (ready(e.src) > r.arrival[e.dst]) fail(ErrorKind::Internal, "negative register deficit");
    const auto d = r.arrival[e.dst] - ready(e.src);
    const auto w = value_width(g.vertices[e.src]);
    note(DelaySite::Edge, i, d, w);
    const auto regs = chain(d, w);
    if (regs.empty()) {
      r.dfg.add_edge(e.src, e.dst, e.port, e.src_port);
    } else {
      r.dfg.add_edge(e.src, regs.front(), 0, e.src_port);
      r.dfg.add_edge(regs.back(), e.dst, e.port);
    }
  }
  for (std::size_t i = 0; i < g.ext_inputs.size(); ++i) {
    const auto &in = g.ext_inputs[i];
    const auto d = r.arrival[in.dst];
    const auto w = operand_width(g.vertices[in.dst], in.port);
    note(DelaySite::Input, i, d, w);
    const auto regs = chain(d, w);
    if (regs.empty()) {
      r.dfg.add_input(in.dst, in.port, in.tag);
    } else {
      r.dfg.add_input(regs.front(), 0, in.tag);
      r.dfg.add_edge(regs.back(), in.dst, in.port);
    }
  }
  for (std::size_t i = 0; i < g.ext_outputs.size(); ++i) {
    const auto &o = g.ext_outputs[i];
    const auto d = r.total_latency - ready(o.src);
    const auto w = value_width(g.vertices[o.src]);
    note(DelaySite::Output, i, d, w);
    const auto regs = chain(d, w);
    if (regs.empty()) {
      r.dfg.add_output(o.src, o.tag, o.src_port);
    } else {
      r.dfg.add_edge(o.src, regs.front(), 0, o.src_port);
      r.dfg.add_output(regs.back(), o.tag);
    }
  }
  return r;
}

} // namespace overlayforge::stitch
