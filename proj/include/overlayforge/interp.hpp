#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "overlayforge/dfg.hpp"
#include "overlayforge/ir.hpp"

namespace overlayforge::sim {

using Memory = std::map<std::uint64_t, std::uint64_t>; // word-addressed, unset words read 0

// Evaluates one vertex. Demux yields 2 results per data lane: lane value on
// the side picked by the condition (0 = true target), zero on the other.
inline std::vector<std::uint64_t> eval_vertex(const graph::Vertex &v, const std::vector<std::uint64_t> &in,
                                              ops::EvalFlags *flags, std::uint32_t source_width = 32) {
  if (v.op.kind.op == Opcode::Demux) {
    std::vector<std::uint64_t> out;
    const bool c = (in.at(0) & 1) != 0;
    for (std::size_t lane = 1; lane < in.size(); ++lane) {
      const auto x = ops::mask(in[lane], v.op.width);
      out.push_back(c ? x : 0);
      out.push_back(c ? 0 : x);
    }
    return out;
  }
  return {ops::evaluate(v.op.kind, v.op.width, in, flags, source_width)};
}

// Reference semantics of a dataflow graph: inputs by distinct tag in
// input_tags() order, outputs in ext_outputs order.
inline std::vector<std::uint64_t> interpret_dfg(const graph::Dfg &g, const std::vector<std::uint64_t> &inputs,
                                                ops::EvalFlags *flags = nullptr) {
  const auto tags = g.input_tags();
  if (inputs.size() != tags.size())
    fail(ErrorKind::Simulation, "graph takes ", tags.size(), " inputs, got ", inputs.size());
  std::map<std::string, std::uint64_t> by_tag;
  for (std::size_t i = 0; i < tags.size(); ++i) by_tag[tags[i]] = inputs[i];
  const auto order = g.topo_order();
  if (!order) fail(ErrorKind::Cyclic, "cannot interpret a cyclic graph");

  std::vector<std::vector<std::uint64_t>> operand(g.size());
  std::vector<std::vector<std::uint32_t>> operand_width(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    operand[v].assign(g.vertices[v].arity, 0);
    operand_width[v].assign(g.vertices[v].arity, g.vertices[v].op.width);
  }
  for (const auto &in : g.ext_inputs)
    if (in.port < operand[in.dst].size()) operand[in.dst][in.port] = by_tag[in.tag];
  const auto outs = g.out_edges();
  std::vector<std::vector<std::uint64_t>> result(g.size());
  for (auto v : *order) {
    const auto &vx = g.vertices[v];
    result[v] = eval_vertex(vx, operand[v], flags, operand_width[v].empty() ? 32 : operand_width[v][0]);
    for (auto e : outs[v]) {
      const auto &ed = g.edges[e];
      if (ed.port >= operand[ed.dst].size()) fail(ErrorKind::InvalidGraph, "edge into undeclared port ", ed.port);
      operand[ed.dst][ed.port] = result[v].at(ed.src_port);
      operand_width[ed.dst][ed.port] = vx.op.kind.op == Opcode::Icmp ? 1 : vx.op.width;
    }
  }
  std::vector<std::uint64_t> out;
  for (const auto &o : g.ext_outputs) out.push_back(result[o.src].at(o.src_port));
  return out;
}

using KernelTable = std::map<std::uint32_t, graph::Dfg>; // hwcall id -> kernel graph

struct IrResult {
  std::optional<std::uint64_t> value;
  Memory memory;
  ops::EvalFlags flags;
  std::uint64_t steps = 0;
};

// Executes `fn` from its entry block. Every executed instruction (terminators
// included) counts one step against `step_limit`.
inline IrResult interpret_ir(const ir::IrModule &m, std::string_view fn, const std::vector<std::uint64_t> &args,
                             Memory memory = {}, const KernelTable &kernels = {},
                             std::uint64_t step_limit = 50'000'000) {
  const auto *f = m.find_function(fn);
  if (!f) fail(ErrorKind::Simulation, "no function '", fn, "'");
  if (args.size() != f->params.size())
    fail(ErrorKind::Simulation, "'", fn, "' takes ", f->params.size(), " arguments, got ", args.size());

  // Resolve names to slots once.
  std::map<std::string, std::size_t> slot;
  for (const auto &p : f->params) slot.emplace(p.name, slot.size());
  for (const auto &b : f->blocks)
    for (const auto &inst : b.instructions)
      for (const auto &r : inst.results) slot.emplace(r, slot.size());
  const auto widths = ir::value_widths(*f);
  std::vector<std::uint32_t> width(slot.size(), 32);
  for (const auto &[n, s] : slot) width[s] = widths.at(n);

  struct Ref {
    bool literal = false;
    std::uint64_t value = 0;
    std::size_t slot = 0;
  };
  auto ref = [&](const ir::Operand &o) {
    if (o.is_literal()) return Ref{true, static_cast<std::uint64_t>(o.literal), 0};
    return Ref{false, 0, slot.at(o.name)};
  };
  struct Step {
    const ir::Instruction *inst;
    std::vector<Ref> in;
    std::vector<std::size_t> out;
    std::vector<std::size_t> targets;
  };
  std::vector<std::vector<Step>> code(f->blocks.size());
  std::vector<Step> term(f->blocks.size());
  auto prepare = [&](const ir::Instruction &inst) {
    Step s{&inst, {}, {}, {}};
    for (const auto &o : inst.operands) s.in.push_back(ref(o));
    for (const auto &r : inst.results) s.out.push_back(slot.at(r));
    for (const auto &t : inst.targets) s.targets.push_back(f->block_index(t));
    return s;
  };
  for (std::size_t b = 0; b < f->blocks.size(); ++b) {
    for (const auto &inst : f->blocks[b].instructions) code[b].push_back(prepare(inst));
    term[b] = prepare(f->blocks[b].terminator);
  }

  IrResult res;
  res.memory = std::move(memory);
  std::vector<std::uint64_t> val(slot.size(), 0);
  for (std::size_t i = 0; i < args.size(); ++i) val[i] = ops::mask(args[i], f->params[i].width);
  auto get = [&](const Ref &r) { return r.literal ? r.value : val[r.slot]; };
  auto tick = [&] {
    if (++res.steps > step_limit) fail(ErrorKind::StepLimit, "step limit ", step_limit, " exceeded in '", fn, "'");
  };

  std::size_t cur = 0, prev = SIZE_MAX;
  std::vector<std::uint64_t> in, phi_vals;
  for (;;) {
    const auto &steps = code[cur];
    // phis read their incoming values simultaneously
    std::size_t nphi = 0;
    phi_vals.clear();
    while (nphi < steps.size() && steps[nphi].inst->op() == Opcode::Phi) {
      const auto &s = steps[nphi];
      tick();
      std::size_t k = 0;
      while (k < s.targets.size() && s.targets[k] != prev) ++k;
      if (k == s.targets.size())
        fail(ErrorKind::Simulation, "phi in '", f->blocks[cur].label, "' has no entry for the incoming edge");
      phi_vals.push_back(ops::mask(get(s.in[k]), s.inst->width));
      ++nphi;
    }
    for (std::size_t i = 0; i < nphi; ++i) val[steps[i].out[0]] = phi_vals[i];
    for (std::size_t i = nphi; i < steps.size(); ++i) {
      const auto &s = steps[i];
      const auto &inst = *s.inst;
      tick();
      in.clear();
      for (const auto &r : s.in) in.push_back(get(r));
      switch (inst.op()) {
      case Opcode::Const: val[s.out[0]] = ops::mask(in[0], inst.width); break;
      case Opcode::Load: {
        auto it = res.memory.find(in[0]);
        val[s.out[0]] = it == res.memory.end() ? 0 : ops::mask(it->second, inst.width);
        break;
      }
      case Opcode::Store: res.memory[in[1]] = ops::mask(in[0], inst.width); break;
      case Opcode::HwCall: {
        auto k = kernels.find(inst.kernel);
        if (k == kernels.end()) fail(ErrorKind::Simulation, "hwcall to unknown kernel k", inst.kernel);
        const auto outs = interpret_dfg(k->second, in, &res.flags);
        if (outs.size() != s.out.size())
          fail(ErrorKind::Simulation, "kernel k", inst.kernel, " yields ", outs.size(), " values, call binds ",
               s.out.size());
        for (std::size_t o = 0; o < outs.size(); ++o) val[s.out[o]] = outs[o];
        break;
      }
      case Opcode::Phi: fail(ErrorKind::InvalidModule, "phi after a non-phi instruction");
      default: {
        const auto src_w = s.in.empty() || s.in[0].literal ? 32 : width[s.in[0].slot];
        val[s.out[0]] = ops::evaluate(inst.kind, inst.width, in, &res.flags, src_w);
      }
      }
    }
    const auto &t = term[cur];
    tick();
    prev = cur;
    switch (t.inst->op()) {
    case Opcode::Br: cur = t.targets[0]; break;
    case Opcode::CondBr: cur = (get(t.in[0]) & 1) ? t.targets[0] : t.targets[1]; break;
    default:
      if (!t.in.empty()) res.value = get(t.in[0]);
      return res;
    }
  }
}

} // namespace overlayforge::sim
