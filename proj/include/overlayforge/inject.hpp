#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "overlayforge/cdfg.hpp"
#include "overlayforge/miner.hpp"

namespace overlayforge::miner {

// One selected embedding of a kernel, resolved against the IR.
struct Instance {
  std::size_t kernel = 0;    // index into the kernel list
  std::size_t embedding = 0; // index into Kernel::embeddings
  std::size_t function = 0;
  std::size_t block = 0;
  std::vector<std::size_t> covered;     // instruction indices, ascending
  std::vector<ir::Operand> inputs;      // in kernel input order
  std::vector<std::string> outputs;     // host names, in kernel output order
  std::size_t position = 0;             // the last covered instruction
};

namespace detail {

inline std::optional<Instance> resolve_instance(const ir::IrModule &m, const std::vector<Dfg> &cdfgs,
                                                const std::vector<Kernel> &kernels, std::size_t ki, std::size_t ei,
                                                std::size_t graph_offset, Diagnostics *diags) {
  const auto &k = kernels[ki];
  const auto &emb = k.embeddings[ei];
  if (emb.graph_index < graph_offset || emb.graph_index - graph_offset >= cdfgs.size()) return std::nullopt;
  const auto &host = cdfgs[emb.graph_index - graph_offset];
  if (!host.origin) fail(ErrorKind::Internal, "graph has no IR origin");
  Instance in;
  in.kernel = ki;
  in.embedding = ei;
  in.function = host.origin->function;
  in.block = host.origin->block;
  const auto &blk = m.functions[in.function].blocks[in.block];
  auto inst_of = [&](std::size_t pattern_vertex) -> std::size_t {
    return host.origin->instruction[emb.vmap[pattern_vertex]];
  };
  auto warn = [&](const std::string &msg) {
    if (diags) diags->push_back({Severity::Warning, "k" + std::to_string(k.id) + " embedding " + std::to_string(ei) + ": " + msg});
    return std::nullopt;
  };
  std::set<std::size_t> covered;
  for (auto pv : k.origin) covered.insert(inst_of(pv));
  for (auto pv : k.bypassed) {
    const auto &inst = blk.instructions[inst_of(pv)];
    if (inst.op() != Opcode::Zext) return warn("covers a width-changing conversion");
    covered.insert(inst_of(pv));
  }
  in.covered.assign(covered.begin(), covered.end());
  in.position = in.covered.back();

  std::set<std::string> covered_names;
  for (auto i : in.covered)
    for (const auto &r : blk.instructions[i].results) covered_names.insert(r);

  for (const auto &tag : k.inputs) {
    if (tag.starts_with('#')) {
      in.inputs.push_back(ir::Operand::constant(std::stoll(tag.substr(1))));
      continue;
    }
    // "v<k>.p<j>": operand j of pattern vertex k; "v<k>": result of pattern vertex k
    const auto dot = tag.find(".p");
    const auto pv = std::stoul(tag.substr(1, dot == std::string::npos ? std::string::npos : dot - 1));
    const auto &inst = blk.instructions[inst_of(pv)];
    ir::Operand o;
    if (dot != std::string::npos) {
      o = inst.operands[std::stoul(tag.substr(dot + 2))];
    } else {
      const auto o_pos = tag.find(".o");
      o = ir::Operand::value(inst.results[o_pos == std::string::npos ? 0 : std::stoul(tag.substr(o_pos + 2))]);
    }
    if (!o.is_literal() && covered_names.count(o.name)) return warn("input is produced inside the kernel");
    in.inputs.push_back(o);
  }
  std::set<std::string> exported;
  for (const auto &out : k.dfg.ext_outputs) {
    const auto &inst = blk.instructions[inst_of(k.origin[out.src])];
    in.outputs.push_back(inst.results[out.src_port]);
    exported.insert(in.outputs.back());
  }
  // every covered value used elsewhere must be exported, and exported values
  // may only be used after the hwcall
  const auto &f = m.functions[in.function];
  for (std::size_t b = 0; b < f.blocks.size(); ++b) {
    auto check = [&](const ir::Instruction &inst, std::size_t idx, bool terminator) -> bool {
      if (b == in.block && !terminator && covered.count(idx)) return true;
      for (const auto &o : inst.operands) {
        if (o.is_literal() || !covered_names.count(o.name)) continue;
        if (!exported.count(o.name)) return false;
        if (b == in.block && !terminator && idx < in.position && inst.op() != Opcode::Phi) return false;
      }
      return true;
    };
    for (std::size_t i = 0; i < f.blocks[b].instructions.size(); ++i)
      if (!check(f.blocks[b].instructions[i], i, false)) return warn("a covered value is used before the kernel exit");
    if (!check(f.blocks[b].terminator, 0, true)) return warn("a covered value is used before the kernel exit");
  }
  return in;
}

} // namespace detail

// Greedy non-overlapping choice of kernel embeddings in `m`: larger kernels
// first, then earlier program position. `graph_offset` is the index of m's
// first block graph in the set the kernels were mined from.
inline std::vector<Instance> select_instances(const ir::IrModule &m, const std::vector<Kernel> &kernels,
                                              std::size_t graph_offset = 0, Diagnostics *diags = nullptr) {
  const auto cdfgs = ir::build_cdfgs(m);
  std::vector<Instance> cands;
  for (std::size_t ki = 0; ki < kernels.size(); ++ki)
    for (std::size_t ei = 0; ei < kernels[ki].embeddings.size(); ++ei)
      if (auto in = detail::resolve_instance(m, cdfgs, kernels, ki, ei, graph_offset, diags)) cands.push_back(*in);
  std::stable_sort(cands.begin(), cands.end(), [&](const Instance &a, const Instance &b) {
    const auto sa = kernels[a.kernel].dfg.size(), sb = kernels[b.kernel].dfg.size();
    if (sa != sb) return sa > sb;
    return std::tie(a.function, a.block, a.covered, a.kernel) < std::tie(b.function, b.block, b.covered, b.kernel);
  });
  std::vector<Instance> chosen;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> taken;
  for (auto &c : cands) {
    bool clash = false;
    for (auto i : c.covered) clash |= taken.count({c.function, c.block, i}) > 0;
    if (clash) continue;
    for (auto i : c.covered) taken.insert({c.function, c.block, i});
    chosen.push_back(std::move(c));
  }
  std::sort(chosen.begin(), chosen.end(), [](const Instance &a, const Instance &b) {
    return std::tie(a.function, a.block, a.position) < std::tie(b.function, b.block, b.position);
  });
  return chosen;
}

// Replaces each selected embedding by one hwcall placed at its last covered
// instruction; the call keeps the union of the replaced `!line` annotations.
inline ir::IrModule inject_hwcalls(const ir::IrModule &m, const std::vector<Kernel> &kernels,
                                   std::size_t graph_offset = 0, Diagnostics *diags = nullptr) {
  const auto chosen = select_instances(m, kernels, graph_offset, diags);
  ir::IrModule out = m;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const Instance *>> by_block;
  for (const auto &in : chosen) by_block[{in.function, in.block}].push_back(&in);
  for (const auto &[key, list] : by_block) {
    const auto &src = m.functions[key.first].blocks[key.second];
    std::map<std::size_t, const Instance *> at;
    std::set<std::size_t> drop;
    for (const auto *in : list) {
      at[in->position] = in;
      for (auto i : in->covered)
        if (!drop.insert(i).second) fail(ErrorKind::Internal, "overlapping kernel embeddings selected");
    }
    std::vector<ir::Instruction> body;
    for (std::size_t i = 0; i < src.instructions.size(); ++i) {
      if (auto it = at.find(i); it != at.end()) {
        const auto &in = *it->second;
        ir::Instruction call;
        call.kind.op = Opcode::HwCall;
        call.kernel = kernels[in.kernel].id;
        call.operands = in.inputs;
        call.results = in.outputs;
        std::set<std::uint32_t> lines;
        for (auto c : in.covered) lines.insert(src.instructions[c].lines.begin(), src.instructions[c].lines.end());
        call.lines.assign(lines.begin(), lines.end());
        body.push_back(std::move(call));
      } else if (!drop.count(i)) {
        body.push_back(src.instructions[i]);
      }
    }
    out.functions[key.first].blocks[key.second].instructions = std::move(body);
  }
  return out;
}

} // namespace overlayforge::miner
