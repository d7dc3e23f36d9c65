#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "overlayforge/dfg.hpp"
#include "overlayforge/ir.hpp"

namespace overlayforge::ir {

// A value reference resolved to the instruction that defines it.
struct DefSite {
  std::size_t block = 0;
  std::size_t instruction = 0;
  std::uint32_t result = 0; // index into Instruction::results
};

inline std::map<std::string, DefSite> definitions(const IrFunction &f) {
  std::map<std::string, DefSite> defs;
  for (std::size_t b = 0; b < f.blocks.size(); ++b)
    for (std::size_t i = 0; i < f.blocks[b].instructions.size(); ++i) {
      const auto &inst = f.blocks[b].instructions[i];
      for (std::uint32_t r = 0; r < inst.results.size(); ++r) defs[inst.results[r]] = {b, i, r};
    }
  return defs;
}

inline std::string literal_tag(std::int64_t v) { return "#" + std::to_string(v); }

// One graph per basic block, in module order (functions, then blocks).
// Vertices are the block's non-terminator, non-const instructions; operand
// values defined outside the block (parameters, other blocks, constants,
// phi-carried values) become external inputs; values used by the terminator
// or by other blocks become external outputs. Disconnected dataflow inside a
// block stays in the same graph.
inline std::vector<graph::Dfg> build_cdfgs(const IrModule &m) {
  std::vector<graph::Dfg> out;
  for (std::size_t fi = 0; fi < m.functions.size(); ++fi) {
    const auto &f = m.functions[fi];
    std::map<std::string, std::int64_t> consts;
    for (const auto &b : f.blocks)
      for (const auto &inst : b.instructions)
        if (inst.op() == Opcode::Const) consts[inst.result()] = inst.operands[0].literal;

    // values consumed outside their defining block, or by a terminator/phi
    std::map<std::string, std::set<std::size_t>> used_in;
    std::set<std::string> escapes_locally;
    for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
      const auto &b = f.blocks[bi];
      for (const auto &inst : b.instructions)
        for (const auto &o : inst.operands)
          if (!o.is_literal()) {
            used_in[o.name].insert(bi);
            if (inst.op() == Opcode::Phi) escapes_locally.insert(o.name);
          }
      for (const auto &o : b.terminator.operands)
        if (!o.is_literal()) escapes_locally.insert(o.name);
    }

    for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
      const auto &b = f.blocks[bi];
      graph::Dfg g;
      graph::DfgOrigin origin{fi, bi, {}};
      std::map<std::string, std::pair<std::size_t, std::uint32_t>> local; // name -> (vertex, result)
      for (std::size_t ii = 0; ii < b.instructions.size(); ++ii) {
        const auto &inst = b.instructions[ii];
        if (inst.op() == Opcode::Const) continue;
        const auto v = g.add_vertex(OpLabel{inst.kind, inst.width}, static_cast<std::uint32_t>(inst.operands.size()));
        origin.instruction.push_back(ii);
        for (std::uint32_t port = 0; port < inst.operands.size(); ++port) {
          const auto &o = inst.operands[port];
          if (o.is_literal()) {
            g.add_input(v, port, literal_tag(o.literal));
          } else if (auto c = consts.find(o.name); c != consts.end()) {
            g.add_input(v, port, literal_tag(c->second));
          } else if (auto d = local.find(o.name); d != local.end() && inst.op() != Opcode::Phi) {
            g.add_edge(d->second.first, v, port, d->second.second);
          } else {
            g.add_input(v, port, o.name);
          }
        }
        for (std::uint32_t r = 0; r < inst.results.size(); ++r) local[inst.results[r]] = {v, r};
      }
      // outputs, in vertex order
      for (std::size_t v = 0; v < g.size(); ++v) {
        const auto &inst = b.instructions[origin.instruction[v]];
        for (std::uint32_t r = 0; r < inst.results.size(); ++r) {
          const auto &name = inst.results[r];
          bool escapes = escapes_locally.count(name) > 0;
          if (auto u = used_in.find(name); u != used_in.end())
            for (auto blk : u->second) escapes |= blk != bi;
          if (escapes) g.add_output(v, name, r);
        }
      }
      g.origin = std::move(origin);
      out.push_back(std::move(g));
    }
  }
  return out;
}

} // namespace overlayforge::ir
