#pragma once

// Shared fixtures for the test binaries: benchmark loading, random graphs and
// kernels, and brute-force oracles that share no code with the library's
// search paths.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "overlayforge/overlayforge.hpp"

namespace testkit {

using namespace overlayforge;
using graph::Dfg;

inline std::string source_dir() { return OVERLAYFORGE_SOURCE_DIR; }

inline std::string read_text(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline const std::vector<std::string> &benchmark_names() {
  static const std::vector<std::string> names = {"matmul", "outer", "robert", "smooth"};
  return names;
}

inline ir::IrModule load_benchmark(const std::string &name) {
  return ir::parse_ir(read_text(std::filesystem::path(source_dir()) / "benchmarks" / (name + ".ir")), name);
}

inline std::vector<miner::Kernel> benchmark_kernels(const ir::IrModule &m, std::uint32_t min_support = 2) {
  miner::MiningConfig cfg;
  cfg.min_support = min_support;
  return miner::mine_kernels(ir::build_cdfgs(m), cfg);
}

// a + b -> mul by c -> subtracted from d: the unbalanced datapath used to
// show register insertion.
inline Dfg unbalanced_graph() {
  Dfg g;
  const auto add = g.add_vertex("add");
  const auto mul = g.add_vertex("mul");
  const auto sub = g.add_vertex("sub");
  g.add_input(add, 0, "a");
  g.add_input(add, 1, "b");
  g.add_edge(add, mul, 0);
  g.add_input(mul, 1, "c");
  g.add_input(sub, 0, "d");
  g.add_edge(mul, sub, 1);
  g.add_output(sub, "r");
  return g;
}

// Three kernels over a branch: bb0 feeds one value into each successor.
inline const char *kBranchIr = R"(fn branchy(x, y, z) {
bb0:
  m = mul x, y;
  a = add m, z;
  c = icmp slt a, y;
  condbr c, bb1, bb2;
bb1:
  s = sub a, x;
  t = shl s, 3;
  br bb3;
bb2:
  u = xor m, z;
  v = and u, 4095;
  br bb3;
bb3:
  r = phi t, bb1, v, bb2;
  ret r;
}
)";

// ---- random graphs ----

inline OpLabel pick_label(std::mt19937_64 &rng, std::size_t nlabels) {
  static const Opcode ops[] = {Opcode::Add, Opcode::Mul, Opcode::Sub, Opcode::Xor, Opcode::And};
  return OpLabel{{ops[rng() % std::min<std::size_t>(nlabels, 5)]}, 32};
}

// Random DAG of binary ops; each operand port is fed by an earlier vertex
// with probability `p_edge`, repeated sources allowed (a*a).
inline Dfg random_dag(std::mt19937_64 &rng, std::size_t n, std::size_t nlabels, double p_edge = 0.45) {
  Dfg g;
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t v = 0; v < n; ++v) g.add_vertex(pick_label(rng, nlabels));
  for (std::size_t v = 1; v < n; ++v)
    for (std::uint32_t port = 0; port < 2; ++port)
      if (u(rng) < p_edge) g.add_edge(rng() % v, v, port);
  return g;
}

// Random connected DAG: vertex v > 0 always takes one operand from an
// earlier vertex, in either port.
inline Dfg random_connected_dag(std::mt19937_64 &rng, std::size_t n, std::size_t nlabels, double p_extra = 0.3) {
  Dfg g;
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t v = 0; v < n; ++v) g.add_vertex(pick_label(rng, nlabels));
  for (std::size_t v = 1; v < n; ++v) {
    const std::uint32_t port = rng() % 2;
    g.add_edge(rng() % v, v, port);
    if (u(rng) < p_extra) g.add_edge(rng() % v, v, 1 - port);
  }
  return g;
}

inline std::vector<std::size_t> random_permutation(std::mt19937_64 &rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// Random compute kernel over mappable ops with external inputs on every
// unfed port and outputs on every unconsumed vertex. Select conditions come
// from comparisons or inputs so widths always line up.
inline Dfg random_kernel(std::mt19937_64 &rng, std::size_t n) {
  static const Opcode pool[] = {Opcode::Add, Opcode::Sub, Opcode::Mul, Opcode::Div, Opcode::And, Opcode::Or,
                                Opcode::Xor, Opcode::Shl, Opcode::Shr, Opcode::Icmp, Opcode::Select};
  static const std::uint32_t widths[] = {8, 16, 32, 64};
  const auto w = widths[rng() % 4];
  Dfg g;
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t next_input = 0;
  for (std::size_t v = 0; v < n; ++v) {
    OpLabel l{{pool[rng() % std::size(pool)]}, w};
    if (l.kind.op == Opcode::Icmp) l.kind.pred = static_cast<Pred>(1 + rng() % (ops::kPredNames.size() - 1));
    g.add_vertex(l);
  }
  for (std::size_t v = 0; v < n; ++v) {
    const auto op = g.vertices[v].op.kind.op;
    for (std::uint32_t port = 0; port < g.vertices[v].arity; ++port) {
      std::vector<std::size_t> cands;
      for (std::size_t s = 0; s < v; ++s) {
        const bool one_bit = g.vertices[s].op.kind.op == Opcode::Icmp;
        const bool cond = op == Opcode::Select && port == 0;
        if (cond == one_bit || (!cond && one_bit && u(rng) < 0.3)) cands.push_back(s);
      }
      if (!cands.empty() && u(rng) < 0.7)
        g.add_edge(cands[rng() % cands.size()], v, port);
      else if (next_input > 0 && u(rng) < 0.2 && !(op == Opcode::Select && port == 0))
        g.add_input(v, port, "x" + std::to_string(rng() % next_input)); // shared input
      else
        g.add_input(v, port, "x" + std::to_string(next_input++));
    }
  }
  std::vector<bool> used(n, false);
  for (const auto &e : g.edges) used[e.src] = true;
  for (std::size_t v = 0; v < n; ++v)
    if (!used[v] || u(rng) < 0.15) g.add_output(v, "y" + std::to_string(v));
  return g;
}

inline std::vector<std::uint64_t> random_vector(std::mt19937_64 &rng, const stitch::Netlist &n) {
  std::vector<std::uint64_t> v;
  for (const auto &p : n.inputs) v.push_back(p.tag.starts_with('#') ? static_cast<std::uint64_t>(std::stoll(p.tag.substr(1)))
                                                                     : ops::mask(rng(), p.width));
  return v;
}

inline sim::Workload random_workload(std::mt19937_64 &rng, const stitch::Netlist &n, std::size_t length) {
  sim::Workload w;
  for (const auto &p : n.inputs) {
    w.names.push_back(p.name);
    w.streams.emplace_back();
  }
  for (std::size_t k = 0; k < length; ++k) {
    const auto v = random_vector(rng, n);
    for (std::size_t i = 0; i < v.size(); ++i) w.streams[i].push_back(v[i]);
  }
  return w;
}

// ---- brute-force oracles ----

// Exhaustive bijection search: same labels, same edge multiset.
inline bool brute_isomorphic(const Dfg &g, const Dfg &h) {
  if (g.size() != h.size() || g.edges.size() != h.edges.size()) return false;
  auto edges_of = [](const Dfg &x, const std::vector<std::size_t> &p) {
    std::vector<std::tuple<std::size_t, std::size_t, std::uint32_t, std::uint32_t>> es;
    for (const auto &e : x.edges) es.emplace_back(p[e.src], p[e.dst], e.port, e.src_port);
    std::sort(es.begin(), es.end());
    return es;
  };
  std::vector<std::size_t> id(h.size());
  std::iota(id.begin(), id.end(), 0);
  const auto he = edges_of(h, id);
  std::vector<std::size_t> perm(g.size());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t v = 0; v < g.size() && ok; ++v) ok = g.vertices[v].op == h.vertices[perm[v]].op;
    if (ok && edges_of(g, perm) == he) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

// Printable identity of a canonical form, usable as a map key.
inline std::string canonical_key(const Dfg &g) {
  const auto cf = graph::canonical_form(g);
  std::string s;
  for (const auto &c : cf.components) s += graph::to_string(c, [](graph::Label l) { return std::to_string(l); }) + ";";
  s += "|";
  for (auto l : cf.isolated) s += std::to_string(l) + ",";
  return s;
}

// Every connected subgraph (single vertices and connected edge subsets) of
// every transaction, keyed canonically, with transaction support.
inline std::map<std::string, std::uint32_t> brute_frequent(const std::vector<Dfg> &gs, std::uint32_t min_support) {
  std::map<std::string, std::set<std::size_t>> tids;
  for (std::size_t t = 0; t < gs.size(); ++t) {
    const auto &g = gs[t];
    for (std::size_t v = 0; v < g.size(); ++v) {
      Dfg one;
      one.add_vertex(g.vertices[v].op, g.vertices[v].arity);
      tids[canonical_key(one)].insert(t);
    }
    const std::size_t m = g.edges.size();
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
      std::map<std::size_t, std::size_t> local;
      Dfg sub;
      std::vector<std::size_t> parent;
      auto vid = [&](std::size_t v) {
        auto [it, fresh] = local.emplace(v, sub.size());
        if (fresh) {
          sub.add_vertex(g.vertices[v].op, g.vertices[v].arity);
          parent.push_back(parent.size());
        }
        return it->second;
      };
      std::function<std::size_t(std::size_t)> find = [&](std::size_t x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
      for (std::size_t e = 0; e < m; ++e)
        if (mask >> e & 1) {
          const auto &ed = g.edges[e];
          const auto a = vid(ed.src), b = vid(ed.dst);
          sub.add_edge(a, b, ed.port, ed.src_port);
          parent[find(a)] = find(b);
        }
      bool connected = true;
      for (std::size_t v = 0; v < sub.size(); ++v) connected &= find(v) == find(0);
      if (connected) tids[canonical_key(sub)].insert(t);
    }
  }
  std::map<std::string, std::uint32_t> out;
  for (const auto &[k, ts] : tids)
    if (ts.size() >= min_support) out[k] = static_cast<std::uint32_t>(ts.size());
  return out;
}

inline std::map<std::string, std::uint32_t> mined_frequent(const miner::MiningResult &r) {
  std::map<std::string, std::uint32_t> out;
  for (const auto &p : r.patterns) out[canonical_key(p.graph)] = p.support;
  return out;
}

// Random transaction set within the oracle's limits.
inline std::vector<Dfg> random_transactions(std::mt19937_64 &rng) {
  std::vector<Dfg> gs(2 + rng() % 4);
  for (auto &g : gs) g = random_dag(rng, 2 + rng() % 7, 3);
  return gs;
}

// Independent arrival recomputation over a regularized graph: every operand
// of every original vertex must arrive on the same cycle.
inline bool arrivals_balanced(const stitch::Regularized &r, std::size_t original) {
  const auto &g = r.dfg;
  std::vector<std::uint32_t> lat(g.size(), 1);
  for (std::size_t v = 0; v < original; ++v) lat[v] = r.latency[v];
  const auto order = g.topo_order();
  if (!order) return false;
  std::vector<std::optional<std::uint32_t>> arrive(g.size());
  const auto ins = g.in_edges();
  for (auto v : *order) {
    std::set<std::uint32_t> times;
    for (auto e : ins[v]) times.insert(*arrive[g.edges[e].src] + lat[g.edges[e].src]);
    for (const auto &in : g.ext_inputs)
      if (in.dst == v) times.insert(0);
    if (times.size() > 1) return false;
    arrive[v] = times.empty() ? 0 : *times.begin();
  }
  return true;
}

} // namespace testkit
