#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "overlayforge/inject.hpp"
#include "overlayforge/regularize.hpp"

namespace overlayforge::miner {

struct MergedKernel {
  std::uint32_t id = 0;
  std::vector<std::uint32_t> kernel_ids;       // member kernels, dataflow order
  std::vector<Instance> instances;             // the embeddings it replaces (empty when wrapped)
  Dfg dfg;
  std::vector<std::string> condition_sources;  // "function/block" of each demux's terminator
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint32_t latency = 0;

  bool merged() const { return instances.size() > 1; }
};

inline MergedKernel wrap_kernel(const Kernel &k) {
  MergedKernel m;
  m.kernel_ids = {k.id};
  m.dfg = k.dfg;
  m.inputs = k.inputs;
  m.outputs = k.outputs;
  m.latency = k.latency;
  return m;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> dependency_groups(std::size_t n,
                                                               const std::vector<std::pair<std::size_t, std::size_t>> &deps) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto &[a, b] : deps) parent[find(a)] = find(b);
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto &[root, g] : groups)
    if (g.size() > 1) out.push_back(std::move(g));
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace detail

// Kernel instances linked by cross-block values collapse into one graph.
// Each cross-block value passes through one register; a value entering a
// direct successor of a condbr block additionally passes a demux lane steered
// by the branch condition (side 0 = first target). Every input kernel is also
// returned wrapped on its own, after the merged groups.
inline std::vector<MergedKernel> merge_kernels(const std::vector<Kernel> &kernels, const ir::IrModule &m,
                                               std::size_t graph_offset = 0, Diagnostics *diags = nullptr) {
  const auto inst = select_instances(m, kernels, graph_offset, diags);
  // (function, name) -> (instance, output index)
  std::map<std::pair<std::size_t, std::string>, std::pair<std::size_t, std::size_t>> producer;
  for (std::size_t i = 0; i < inst.size(); ++i)
    for (std::size_t o = 0; o < inst[i].outputs.size(); ++o) producer[{inst[i].function, inst[i].outputs[o]}] = {i, o};
  auto produced = [&](std::size_t fn, const ir::Operand &o) -> const std::pair<std::size_t, std::size_t> * {
    if (o.is_literal()) return nullptr;
    auto it = producer.find({fn, o.name});
    return it == producer.end() ? nullptr : &it->second;
  };
  auto condition_of = [&](const Instance &a, const Instance &b) -> const ir::Instruction * {
    const auto &t = m.functions[a.function].blocks[a.block].terminator;
    if (t.op() != Opcode::CondBr || t.targets[0] == t.targets[1]) return nullptr;
    const auto &label = m.functions[b.function].blocks[b.block].label;
    return (t.targets[0] == label || t.targets[1] == label) ? &t : nullptr;
  };

  std::vector<std::pair<std::size_t, std::size_t>> deps;
  for (std::size_t b = 0; b < inst.size(); ++b)
    for (const auto &o : inst[b].inputs)
      if (const auto *p = produced(inst[b].function, o); p && inst[p->first].block != inst[b].block) {
        deps.emplace_back(p->first, b);
        if (const auto *t = condition_of(inst[p->first], inst[b]))
          if (const auto *c = produced(inst[b].function, t->operands[0]); c && c->first != b) deps.emplace_back(c->first, b);
      }

  std::vector<MergedKernel> out;
  for (const auto &group : detail::dependency_groups(inst.size(), deps)) {
    // dataflow order inside the group; a cycle means loop-carried values
    std::set<std::size_t> members(group.begin(), group.end());
    std::map<std::size_t, std::set<std::size_t>> preds;
    for (const auto &[a, b] : deps)
      if (members.count(a) && members.count(b) && a != b) preds[b].insert(a);
    std::vector<std::size_t> order;
    std::set<std::size_t> placed;
    while (order.size() < group.size()) {
      bool progress = false;
      for (auto i : group) {
        if (placed.count(i)) continue;
        bool ready = true;
        for (auto p : preds[i]) ready &= placed.count(p) > 0;
        if (!ready) continue;
        order.push_back(i);
        placed.insert(i);
        progress = true;
        break;
      }
      if (!progress) break;
    }
    if (order.size() < group.size()) {
      if (diags) {
        std::string names;
        for (auto i : group) names += (names.empty() ? "k" : ", k") + std::to_string(kernels[inst[i].kernel].id);
        diags->push_back({Severity::Warning, "cyclic block dependency among " + names + "; group not merged"});
      }
      continue;
    }

    MergedKernel mk;
    Dfg &g = mk.dfg;
    std::map<std::string, std::pair<std::size_t, std::uint32_t>> value; // host name -> (vertex, result)
    std::map<std::string, std::size_t> reg_of;
    struct DemuxState {
      std::size_t vertex;
      std::map<std::string, std::uint32_t> lane;
    };
    std::map<std::pair<std::size_t, std::size_t>, DemuxState> demux_of; // (function, block)

    auto source_for = [&](const ir::Operand &o, std::size_t dst, std::uint32_t port) {
      if (o.is_literal()) {
        g.add_input(dst, port, ir::literal_tag(o.literal));
      } else if (auto v = value.find(o.name); v != value.end()) {
        g.add_edge(v->second.first, dst, port, v->second.second);
      } else {
        g.add_input(dst, port, o.name);
      }
    };

    for (auto i : order) {
      const auto &in = inst[i];
      const auto &k = kernels[in.kernel];
      const auto base = g.size();
      for (const auto &v : k.dfg.vertices) g.vertices.push_back(v);
      for (const auto &e : k.dfg.edges) g.add_edge(base + e.src, base + e.dst, e.port, e.src_port);
      std::map<std::string, const ir::Operand *> operand_of;
      for (std::size_t t = 0; t < k.inputs.size(); ++t) operand_of[k.inputs[t]] = &in.inputs[t];
      for (const auto &x : k.dfg.ext_inputs) {
        const auto &o = *operand_of.at(x.tag);
        const auto dst = base + x.dst;
        const auto *p = produced(in.function, o);
        if (!p || !members.count(p->first) || inst[p->first].block == in.block) {
          source_for(o, dst, x.port);
          continue;
        }
        // cross-block value: register, then a demux lane when entering a branch target
        auto r = reg_of.find(o.name);
        if (r == reg_of.end()) {
          const auto src = value.at(o.name);
          const auto w = stitch::value_width(g.vertices[src.first]);
          const auto reg = g.add_vertex(OpLabel{{Opcode::Register}, w <= 8 ? 8u : w <= 16 ? 16u : w <= 32 ? 32u : 64u}, 1);
          g.add_edge(src.first, reg, 0, src.second);
          r = reg_of.emplace(o.name, reg).first;
        }
        const auto &pin = inst[p->first];
        if (const auto *t = condition_of(pin, in)) {
          auto [d, fresh] = demux_of.try_emplace({pin.function, pin.block}, DemuxState{0, {}});
          if (fresh) {
            d->second.vertex = g.add_vertex(OpLabel{{Opcode::Demux}, 32}, 1);
            source_for(t->operands[0], d->second.vertex, 0);
            mk.condition_sources.push_back(m.functions[pin.function].name + "/" +
                                           m.functions[pin.function].blocks[pin.block].label);
          }
          auto &dm = d->second;
          auto [lane, new_lane] = dm.lane.try_emplace(o.name, static_cast<std::uint32_t>(dm.lane.size()));
          if (new_lane) {
            g.vertices[dm.vertex].arity = lane->second + 2;
            g.vertices[dm.vertex].op.width = std::max(g.vertices[dm.vertex].op.width, g.vertices[r->second].op.width);
            g.add_edge(r->second, dm.vertex, lane->second + 1);
          }
          const auto &label = m.functions[in.function].blocks[in.block].label;
          const std::uint32_t side = t->targets[0] == label ? 0 : 1;
          g.add_edge(dm.vertex, dst, x.port, 2 * lane->second + side);
        } else {
          g.add_edge(r->second, dst, x.port);
        }
      }
      for (std::size_t o = 0; o < k.dfg.ext_outputs.size(); ++o) {
        const auto &x = k.dfg.ext_outputs[o];
        value[in.outputs[o]] = {base + x.src, x.src_port};
      }
      mk.kernel_ids.push_back(k.id);
      mk.instances.push_back(in);
    }
    // outputs: member results still read by code the group does not replace
    std::set<std::pair<std::size_t, std::size_t>> replaced;
    for (const auto &in : mk.instances)
      for (auto c : in.covered) replaced.insert({in.block, c});
    const auto fn = mk.instances.front().function;
    const auto &f = m.functions[fn];
    std::set<std::string> used_outside;
    for (std::size_t b = 0; b < f.blocks.size(); ++b) {
      for (std::size_t i = 0; i < f.blocks[b].instructions.size(); ++i) {
        if (replaced.count({b, i})) continue;
        for (const auto &o : f.blocks[b].instructions[i].operands)
          if (!o.is_literal()) used_outside.insert(o.name);
      }
      for (const auto &o : f.blocks[b].terminator.operands)
        if (!o.is_literal()) used_outside.insert(o.name);
    }
    for (const auto &in : mk.instances)
      for (const auto &name : in.outputs)
        if (used_outside.count(name)) g.add_output(value[name].first, name, static_cast<std::uint32_t>(value[name].second));
    mk.inputs = g.input_tags();
    for (const auto &o : g.ext_outputs) mk.outputs.push_back(o.tag);
    g.validate();
    out.push_back(std::move(mk));
  }
  for (const auto &k : kernels) out.push_back(wrap_kernel(k));
  for (std::uint32_t i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

} // namespace overlayforge::miner
