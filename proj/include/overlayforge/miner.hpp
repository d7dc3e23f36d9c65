#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "overlayforge/dfs_code.hpp"
#include "overlayforge/embedding.hpp"
#include "overlayforge/prune.hpp"

namespace overlayforge::miner {

using graph::DfsCode;
using graph::Dfg;
using graph::EdgeCode;
using graph::Embedding;
using graph::Label;

struct MiningConfig {
  std::uint32_t min_support = 2;
  std::uint32_t max_kernel_edges = 64;
  bool report_maximal_only = true;
  bool record_trace = false; // keep (parent, child) supports of the explored code tree

  void validate() const {
    if (min_support < 1) fail(ErrorKind::InvalidGraph, "min_support must be at least 1");
    if (max_kernel_edges < 1) fail(ErrorKind::InvalidGraph, "max_kernel_edges must be at least 1");
  }
};

// A frequent connected pattern. `code` uses the miner's frequency-ranked
// labels; `graph` has vertex ids equal to discovery indices.
struct Pattern {
  DfsCode code;
  Dfg graph;
  std::uint32_t support = 0;
  std::vector<Embedding> embeddings;
  bool maximal = true;
};

struct TreeStep {
  std::uint32_t parent_support = 0;
  std::uint32_t child_support = 0;
};

struct MiningResult {
  std::vector<Pattern> patterns;
  std::vector<OpLabel> label_table; // miner label -> opcode label
  std::vector<TreeStep> trace;
  std::size_t explored = 0;
  Diagnostics diagnostics;
};

namespace detail {

struct Projection {
  std::uint32_t tid = 0;
  std::vector<std::uint32_t> vmap;  // discovery index -> host vertex
  std::vector<std::uint32_t> edges; // host edges used, sorted

  bool uses(std::uint32_t e) const { return std::binary_search(edges.begin(), edges.end(), e); }
  std::int64_t index_of(std::uint32_t hv) const {
    for (std::size_t i = 0; i < vmap.size(); ++i)
      if (vmap[i] == hv) return static_cast<std::int64_t>(i);
    return -1;
  }
};

struct EdgeCodeLess {
  bool operator()(const EdgeCode &a, const EdgeCode &b) const { return graph::compare_edge(a, b) < 0; }
};

inline std::uint32_t support_of(const std::vector<Projection> &ps) {
  std::set<std::uint32_t> tids;
  for (const auto &p : ps) tids.insert(p.tid);
  return static_cast<std::uint32_t>(tids.size());
}

inline std::vector<std::uint32_t> rightmost_path(const DfsCode &code) {
  std::vector<std::uint32_t> path;
  std::int64_t want = -1;
  for (std::size_t i = code.size(); i-- > 0;) {
    const auto &c = code.codes[i];
    if (c.forward() && (want < 0 || c.to == want)) {
      if (path.empty()) path.push_back(c.to);
      path.push_back(c.from);
      want = c.from;
    }
  }
  std::reverse(path.begin(), path.end());
  return path;
}

class Miner {
public:
  Miner(const std::vector<Dfg> &gs, const MiningConfig &cfg) : gs_(gs), cfg_(cfg) {}

  MiningResult run() {
    cfg_.validate();
    MiningResult res;
    // (1) transaction frequency of every vertex label
    std::map<std::uint32_t, std::uint32_t> freq;
    for (const auto &g : gs_) {
      std::set<std::uint32_t> seen;
      for (const auto &v : g.vertices) seen.insert(collation_key(v.op));
      for (auto k : seen) ++freq[k];
    }
    // (2)+(3) keep frequent labels, ranked by descending frequency
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ranked;
    for (auto [k, f] : freq)
      if (f >= cfg_.min_support) ranked.emplace_back(f, k);
    std::sort(ranked.begin(), ranked.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    std::map<std::uint32_t, Label> relabel;
    for (const auto &[f, k] : ranked) {
      relabel[k] = static_cast<Label>(res.label_table.size());
      res.label_table.push_back(graph::label_from_key(k));
    }
    labels_ = res.label_table;

    host_.clear();
    host_of_.clear();
    for (const auto &g : gs_) {
      graph::LabeledGraph lg;
      std::vector<std::int64_t> local(g.size(), -1);
      std::vector<std::uint32_t> back;
      for (std::size_t v = 0; v < g.size(); ++v)
        if (auto it = relabel.find(collation_key(g.vertices[v].op)); it != relabel.end()) {
          local[v] = lg.add_vertex(it->second);
          back.push_back(static_cast<std::uint32_t>(v));
        }
      for (const auto &e : g.edges)
        if (local[e.src] >= 0 && local[e.dst] >= 0)
          lg.add_edge(static_cast<std::uint32_t>(local[e.src]), static_cast<std::uint32_t>(local[e.dst]), e.port,
                      e.src_port);
      host_.push_back(std::move(lg));
      host_of_.push_back(std::move(back));
    }

    // infrequent 1-edge tuples are dropped for good
    std::map<EdgeCode, std::set<std::uint32_t>, EdgeCodeLess> edge_tids;
    for (std::uint32_t t = 0; t < host_.size(); ++t)
      for (const auto &e : host_[t].edges) edge_tids[one_edge(host_[t], e)].insert(t);
    dead_.assign(host_.size(), {});
    removed_.assign(host_.size(), {});
    for (std::uint32_t t = 0; t < host_.size(); ++t) {
      dead_[t].assign(host_[t].edges.size(), false);
      removed_[t].assign(host_[t].edges.size(), false);
      for (std::uint32_t e = 0; e < host_[t].edges.size(); ++e)
        if (edge_tids[one_edge(host_[t], host_[t].edges[e])].size() < cfg_.min_support) dead_[t][e] = removed_[t][e] = true;
    }

    // single-vertex patterns
    for (Label l = 0; l < labels_.size(); ++l) {
      std::vector<Projection> ps;
      for (std::uint32_t t = 0; t < host_.size(); ++t)
        for (std::uint32_t v = 0; v < host_[t].size(); ++v)
          if (host_[t].labels[v] == l) ps.push_back({t, {v}, {}});
      record(res, DfsCode{}, {l}, ps);
    }

    // (4) S1 in DFS lexicographic order, (5) grow, (6) GS := GS - e
    std::vector<EdgeCode> s1;
    for (const auto &[code, tids] : edge_tids)
      if (tids.size() >= cfg_.min_support) s1.push_back(code);
    for (const auto &e : s1) {
      std::vector<Projection> ps;
      for (std::uint32_t t = 0; t < host_.size(); ++t)
        for (std::uint32_t id = 0; id < host_[t].edges.size(); ++id) {
          if (removed_[t][id]) continue;
          const auto &he = host_[t].edges[id];
          const graph::EdgeLabel fwd{graph::Dir::Fwd, he.port, he.src_port};
          const graph::EdgeLabel rev{graph::Dir::Rev, he.port, he.src_port};
          if (e.edge == fwd && host_[t].labels[he.src] == e.from_label && host_[t].labels[he.dst] == e.to_label)
            ps.push_back({t, {he.src, he.dst}, {id}});
          else if (e.edge == rev && host_[t].labels[he.dst] == e.from_label && host_[t].labels[he.src] == e.to_label)
            ps.push_back({t, {he.dst, he.src}, {id}});
        }
      DfsCode code;
      code.codes.push_back(e);
      grow(res, code, ps);
      for (std::uint32_t t = 0; t < host_.size(); ++t)
        for (std::uint32_t id = 0; id < host_[t].edges.size(); ++id)
          if (one_edge(host_[t], host_[t].edges[id]) == e) removed_[t][id] = true;
      std::uint32_t remaining = 0;
      for (std::uint32_t t = 0; t < host_.size(); ++t)
        remaining += std::find(removed_[t].begin(), removed_[t].end(), false) != removed_[t].end();
      if (remaining < cfg_.min_support) break;
    }

    if (cfg_.report_maximal_only) {
      std::vector<Pattern> kept;
      for (auto &p : res.patterns)
        if (p.maximal) kept.push_back(std::move(p));
      res.patterns = std::move(kept);
    }
    return res;
  }

private:
  // Smaller of the two single-edge codes of a host edge.
  static EdgeCode one_edge(const graph::LabeledGraph &g, const graph::LabeledGraph::DirectedEdge &e) {
    EdgeCode f{0, 1, g.labels[e.src], {graph::Dir::Fwd, e.port, e.src_port}, g.labels[e.dst]};
    EdgeCode r{0, 1, g.labels[e.dst], {graph::Dir::Rev, e.port, e.src_port}, g.labels[e.src]};
    return graph::compare_edge(r, f) < 0 ? r : f;
  }

  void grow(MiningResult &res, const DfsCode &code, const std::vector<Projection> &ps) {
    ++res.explored;
    const auto sup = support_of(ps);
    const auto lg = graph::graph_of(code);
    record(res, code, lg.labels, ps);
    if (code.size() >= cfg_.max_kernel_edges) {
      res.diagnostics.push_back({Severity::Warning, "pattern growth stopped at max_kernel_edges = " +
                                                        std::to_string(cfg_.max_kernel_edges)});
      return;
    }
    const auto rmpath = rightmost_path(code);
    const auto r = rmpath.back();
    const auto next = static_cast<std::uint32_t>(lg.size());
    std::map<EdgeCode, std::vector<Projection>, EdgeCodeLess> ext;
    for (const auto &p : ps) {
      const auto &h = host_[p.tid];
      const auto hr = p.vmap[r];
      for (const auto &a : h.adj[hr]) {
        if (removed_[p.tid][a.edge] || p.uses(a.edge)) continue;
        const auto j = p.index_of(a.to);
        if (j < 0 || std::find(rmpath.begin(), rmpath.end(), static_cast<std::uint32_t>(j)) == rmpath.end())
          continue;
        add_ext(ext, p, {r, static_cast<std::uint32_t>(j), lg.labels[r], a.label, lg.labels[j]}, a.edge, -1);
      }
      for (auto u : rmpath)
        for (const auto &a : h.adj[p.vmap[u]]) {
          if (removed_[p.tid][a.edge] || p.uses(a.edge) || p.index_of(a.to) >= 0) continue;
          add_ext(ext, p, {u, next, lg.labels[u], a.label, h.labels[a.to]}, a.edge, a.to);
        }
    }
    for (const auto &[e, cps] : ext) {
      const auto child_sup = support_of(cps);
      if (cfg_.record_trace) res.trace.push_back({sup, child_sup});
      if (child_sup < cfg_.min_support) continue;
      DfsCode child = code;
      child.codes.push_back(e);
      if (!graph::is_min(graph::graph_of(child), child)) continue;
      grow(res, child, cps);
    }
  }

  static void add_ext(std::map<EdgeCode, std::vector<Projection>, EdgeCodeLess> &ext, const Projection &p,
                      const EdgeCode &e, std::uint32_t edge, std::int64_t new_vertex) {
    Projection q = p;
    q.edges.insert(std::upper_bound(q.edges.begin(), q.edges.end(), edge), edge);
    if (new_vertex >= 0) q.vmap.push_back(static_cast<std::uint32_t>(new_vertex));
    ext[e].push_back(std::move(q));
  }

  void record(MiningResult &res, const DfsCode &code, const std::vector<Label> &labels,
              const std::vector<Projection> &ps) {
    Pattern pat;
    pat.code = code;
    pat.support = support_of(ps);
    if (pat.support < cfg_.min_support) return;
    for (auto l : labels) pat.graph.add_vertex(labels_[l]);
    for (const auto &c : code.codes) {
      const bool fwd = c.edge.dir == graph::Dir::Fwd;
      pat.graph.add_edge(fwd ? c.from : c.to, fwd ? c.to : c.from, c.edge.port, c.edge.src_port);
    }
    std::set<Embedding> embs;
    for (const auto &p : ps) {
      Embedding e{p.tid, {}};
      for (auto hv : p.vmap) e.vmap.push_back(host_of_[p.tid][hv]);
      embs.insert(std::move(e));
    }
    pat.embeddings.assign(embs.begin(), embs.end());
    // arity follows the host vertices
    for (std::size_t v = 0; v < pat.graph.size(); ++v) {
      const auto &e0 = pat.embeddings.front();
      pat.graph.vertices[v].arity = gs_[e0.graph_index].vertices[e0.vmap[v]].arity;
    }
    pat.maximal = !has_frequent_extension(ps);
    res.patterns.push_back(std::move(pat));
  }

  // Any one-edge supergraph frequent? Checked against the transactions with
  // only the infrequent edges removed, so exhausted S1 edges still count.
  bool has_frequent_extension(const std::vector<Projection> &ps) const {
    std::map<std::tuple<std::uint32_t, graph::EdgeLabel, std::int64_t, Label>, std::set<std::uint32_t>> seen;
    for (const auto &p : ps) {
      const auto &h = host_[p.tid];
      for (std::uint32_t i = 0; i < p.vmap.size(); ++i)
        for (const auto &a : h.adj[p.vmap[i]]) {
          if (dead_[p.tid][a.edge] || p.uses(a.edge)) continue;
          const auto j = p.index_of(a.to);
          auto &tids = seen[{i, a.label, j, j >= 0 ? 0 : h.labels[a.to]}];
          tids.insert(p.tid);
          if (tids.size() >= cfg_.min_support) return true;
        }
    }
    return false;
  }

  const std::vector<Dfg> &gs_;
  MiningConfig cfg_;
  std::vector<OpLabel> labels_;
  std::vector<graph::LabeledGraph> host_;
  std::vector<std::vector<std::uint32_t>> host_of_; // local vertex -> original vertex
  std::vector<std::vector<bool>> dead_;             // infrequent edges
  std::vector<std::vector<bool>> removed_;          // dead or exhausted
};

} // namespace detail

// Frequent connected subgraphs of `gs` (transaction support).
inline MiningResult mine_patterns(const std::vector<Dfg> &gs, const MiningConfig &cfg) {
  return detail::Miner(gs, cfg).run();
}

struct Kernel {
  std::uint32_t id = 0;
  Dfg dfg;                                 // pruned
  Dfg pattern;                             // before pruning
  DfsCode canonical;                       // of the pattern, default collation
  std::uint32_t support = 0;
  std::vector<Embedding> embeddings;       // pattern vertex -> host vertex
  std::vector<std::size_t> origin;         // kernel vertex -> pattern vertex
  std::vector<std::size_t> bypassed;       // pattern conversions wired through
  std::vector<std::string> inputs;         // declared input order
  std::vector<std::string> outputs;
  std::uint32_t latency = 0;               // filled by stitch

  std::uint64_t weight() const {
    std::uint64_t w = 0;
    for (const auto &v : dfg.vertices) w += ops::default_latency(v.op.kind.op, v.op.width);
    return w;
  }
};

// Pattern graph with open operand ports as inputs "v<k>.p<j>" (or "#c" when
// every embedding feeds the same literal c) and every vertex whose host value
// escapes the embedding as output "v<k>".
inline Dfg kernel_pattern(const Pattern &p, const std::vector<Dfg> &gs) {
  Dfg g = p.graph;
  auto shared_literal = [&](std::size_t v, std::uint32_t port) -> std::optional<std::string> {
    std::optional<std::string> lit;
    for (const auto &emb : p.embeddings) {
      std::optional<std::string> here;
      for (const auto &in : gs[emb.graph_index].ext_inputs)
        if (in.dst == emb.vmap[v] && in.port == port) here = in.tag;
      if (!here || !here->starts_with('#') || (lit && *lit != *here)) return std::nullopt;
      lit = here;
    }
    return lit;
  };
  for (std::size_t v = 0; v < g.size(); ++v)
    for (std::uint32_t port = 0; port < g.vertices[v].arity; ++port) {
      bool fed = false;
      for (const auto &e : g.edges) fed |= e.dst == v && e.port == port;
      if (fed) continue;
      if (auto lit = shared_literal(v, port))
        g.add_input(v, port, *lit);
      else
        g.add_input(v, port, "v" + std::to_string(v) + ".p" + std::to_string(port));
    }
  std::set<std::size_t> escaping;
  for (const auto &emb : p.embeddings) {
    const auto &host = gs[emb.graph_index];
    std::map<std::size_t, std::size_t> inv;
    for (std::size_t v = 0; v < emb.vmap.size(); ++v) inv[emb.vmap[v]] = v;
    for (const auto &he : host.edges) {
      auto s = inv.find(he.src);
      if (s == inv.end()) continue;
      auto d = inv.find(he.dst);
      bool inside = false;
      if (d != inv.end())
        for (const auto &pe : g.edges)
          inside |= pe.src == s->second && pe.dst == d->second && pe.port == he.port && pe.src_port == he.src_port;
      if (!inside) escaping.insert(s->second);
    }
    for (const auto &o : host.ext_outputs)
      if (auto s = inv.find(o.src); s != inv.end()) escaping.insert(s->second);
  }
  for (auto v : escaping)
    if (g.vertices[v].op.kind.op != Opcode::Store) g.add_output(v, "v" + std::to_string(v));
  return g;
}

// Kernels: pruned maximal frequent patterns, heaviest compute first
// (sum of default latencies, then size, support and canonical code).
inline std::vector<Kernel> mine_kernels(const std::vector<Dfg> &gs, const MiningConfig &cfg,
                                        Diagnostics *diags = nullptr) {
  if (gs.empty()) fail(ErrorKind::InvalidGraph, "no transactions to mine");
  auto res = mine_patterns(gs, cfg);
  if (diags) diags->insert(diags->end(), res.diagnostics.begin(), res.diagnostics.end());
  std::vector<Kernel> out;
  for (auto &p : res.patterns) {
    Kernel k;
    k.pattern = kernel_pattern(p, gs);
    auto pr = prune(k.pattern);
    if (pr.dfg.empty() || pr.dfg.ext_inputs.empty() || pr.dfg.ext_outputs.empty()) continue;
    k.dfg = std::move(pr.dfg);
    k.origin = std::move(pr.kept);
    k.bypassed = std::move(pr.bypassed);
    k.canonical = p.graph.edges.empty() ? DfsCode{} : graph::min_dfs_code(p.graph);
    k.support = p.support;
    k.embeddings = std::move(p.embeddings);
    k.inputs = k.dfg.input_tags();
    for (const auto &o : k.dfg.ext_outputs) k.outputs.push_back(o.tag);
    out.push_back(std::move(k));
  }
  std::stable_sort(out.begin(), out.end(), [](const Kernel &a, const Kernel &b) {
    if (a.weight() != b.weight()) return a.weight() > b.weight();
    if (a.dfg.size() != b.dfg.size()) return a.dfg.size() > b.dfg.size();
    if (a.support != b.support) return a.support > b.support;
    return graph::code_less(a.canonical, b.canonical);
  });
  for (std::uint32_t i = 0; i < out.size(); ++i) out[i].id = i;
  return out;
}

} // namespace overlayforge::miner
