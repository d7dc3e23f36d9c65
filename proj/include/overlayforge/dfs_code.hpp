#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "overlayforge/common.hpp"
#include "overlayforge/dfg.hpp"

namespace overlayforge::graph {

using Label = std::uint32_t;

// Traversal direction of a directed edge inside a DFS code: Fwd when the
// edge is walked from its source to its destination.
enum class Dir : std::uint8_t { Fwd = 0, Rev = 1 };

// Edge label in a DFS code, ordered by (direction, port, src_port).
struct EdgeLabel {
  Dir dir = Dir::Fwd;
  std::uint32_t port = 0;
  std::uint32_t src_port = 0;
  friend auto operator<=>(const EdgeLabel &, const EdgeLabel &) = default;
};

struct EdgeCode {
  std::uint32_t from = 0; // discovery index of the tail
  std::uint32_t to = 0;   // discovery index of the head
  Label from_label = 0;
  EdgeLabel edge;
  Label to_label = 0;

  bool forward() const { return from < to; }
  friend bool operator==(const EdgeCode &, const EdgeCode &) = default;
};

// Total order on edge tuples that share a common code prefix: structure
// first (backward edges before forward ones, deeper forward sources first),
// then (from_label, edge, to_label).
inline std::strong_ordering compare_edge(const EdgeCode &a, const EdgeCode &b) {
  if (a.from == b.from && a.to == b.to) {
    if (auto c = a.from_label <=> b.from_label; c != 0) return c;
    if (auto c = a.edge <=> b.edge; c != 0) return c;
    return a.to_label <=> b.to_label;
  }
  const bool af = a.forward(), bf = b.forward();
  bool less;
  if (af && bf)
    less = a.to < b.to || (a.to == b.to && a.from > b.from);
  else if (!af && !bf)
    less = a.from < b.from || (a.from == b.from && a.to < b.to);
  else if (!af)
    less = a.from < b.to;
  else
    less = a.to <= b.from;
  return less ? std::strong_ordering::less : std::strong_ordering::greater;
}

struct DfsCode {
  std::vector<EdgeCode> codes;

  std::size_t size() const { return codes.size(); }
  bool empty() const { return codes.empty(); }
  friend bool operator==(const DfsCode &, const DfsCode &) = default;
};

// Lexicographic order on DFS codes; a strict prefix precedes its extensions.
inline std::strong_ordering compare_codes(const DfsCode &a, const DfsCode &b) {
  const auto n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i)
    if (auto c = compare_edge(a.codes[i], b.codes[i]); c != 0) return c;
  return a.size() <=> b.size();
}

inline bool code_less(const DfsCode &a, const DfsCode &b) { return compare_codes(a, b) < 0; }

struct CodeLess {
  bool operator()(const DfsCode &a, const DfsCode &b) const { return code_less(a, b); }
};

// Integer-labeled directed multigraph used by the canonical-code machinery
// and the miner. Edges are traversable in both directions.
struct LabeledGraph {
  struct Arc {
    std::uint32_t edge = 0;
    std::uint32_t to = 0;
    EdgeLabel label;
  };
  struct DirectedEdge {
    std::uint32_t src = 0, dst = 0, port = 0, src_port = 0;
  };

  std::vector<Label> labels;
  std::vector<DirectedEdge> edges;
  std::vector<std::vector<Arc>> adj;

  std::uint32_t add_vertex(Label l) {
    labels.push_back(l);
    adj.emplace_back();
    return static_cast<std::uint32_t>(labels.size() - 1);
  }
  std::uint32_t add_edge(std::uint32_t src, std::uint32_t dst, std::uint32_t port, std::uint32_t src_port = 0) {
    const auto id = static_cast<std::uint32_t>(edges.size());
    edges.push_back({src, dst, port, src_port});
    adj[src].push_back({id, dst, {Dir::Fwd, port, src_port}});
    adj[dst].push_back({id, src, {Dir::Rev, port, src_port}});
    return id;
  }
  std::size_t size() const { return labels.size(); }
};

// Default collation: vertex labels compare by opcode-table order.
inline LabeledGraph to_labeled(const Dfg &g) {
  LabeledGraph lg;
  for (const auto &v : g.vertices) lg.add_vertex(collation_key(v.op));
  for (const auto &e : g.edges)
    lg.add_edge(static_cast<std::uint32_t>(e.src), static_cast<std::uint32_t>(e.dst), e.port, e.src_port);
  return lg;
}

inline OpLabel label_from_key(Label key) {
  OpLabel l;
  l.kind.op = static_cast<Opcode>(key >> 16);
  l.kind.pred = static_cast<Pred>((key >> 8) & 0xffu);
  l.width = key & 0xffu;
  return l;
}

inline bool is_connected(const LabeledGraph &g) {
  if (g.size() == 0) return true;
  std::vector<bool> seen(g.size(), false);
  std::vector<std::uint32_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (const auto &a : g.adj[v])
      if (!seen[a.to]) {
        seen[a.to] = true;
        ++count;
        stack.push_back(a.to);
      }
  }
  return count == g.size();
}

namespace detail {

// One partial DFS traversal: the state the code search branches over.
struct Traversal {
  std::vector<std::int32_t> disc;    // vertex -> discovery index, -1 if unseen
  std::vector<std::uint32_t> order;  // discovery index -> vertex
  std::vector<std::uint32_t> rmpath; // discovery indices, root .. rightmost
  std::vector<bool> used;            // per edge

  bool operator<(const Traversal &o) const { return std::tie(order, used) < std::tie(o.order, o.used); }
};

struct Move {
  EdgeCode code;
  std::uint32_t edge = 0;
  std::uint32_t target = 0;
};

inline Traversal start(const LabeledGraph &g, std::uint32_t root) {
  Traversal t;
  t.disc.assign(g.size(), -1);
  t.used.assign(g.edges.size(), false);
  t.disc[root] = 0;
  t.order.push_back(root);
  t.rmpath.push_back(0);
  return t;
}

// Valid next edges of a DFS traversal: backward edges from the rightmost
// vertex come first; otherwise forward edges from the deepest vertex of the
// rightmost path that still has unused edges.
inline std::vector<Move> moves(const LabeledGraph &g, const Traversal &t) {
  std::vector<Move> out;
  const auto ri = t.rmpath.back();
  const auto r = t.order[ri];
  for (const auto &a : g.adj[r])
    if (!t.used[a.edge] && t.disc[a.to] >= 0)
      out.push_back({{ri, static_cast<std::uint32_t>(t.disc[a.to]), g.labels[r], a.label, g.labels[a.to]}, a.edge, a.to});
  if (!out.empty()) return out;
  const auto next = static_cast<std::uint32_t>(t.order.size());
  for (std::size_t k = t.rmpath.size(); k-- > 0;) {
    const auto ui = t.rmpath[k];
    const auto u = t.order[ui];
    for (const auto &a : g.adj[u])
      if (!t.used[a.edge] && t.disc[a.to] < 0)
        out.push_back({{ui, next, g.labels[u], a.label, g.labels[a.to]}, a.edge, a.to});
    if (!out.empty()) return out;
  }
  return out;
}

inline Traversal apply(Traversal t, const Move &m) {
  t.used[m.edge] = true;
  if (m.code.forward()) {
    t.disc[m.target] = static_cast<std::int32_t>(m.code.to);
    t.order.push_back(m.target);
    auto it = std::find(t.rmpath.begin(), t.rmpath.end(), m.code.from);
    t.rmpath.erase(std::next(it), t.rmpath.end());
    t.rmpath.push_back(m.code.to);
  }
  return t;
}

// Greedy branch-and-bound over all traversals that realize the smallest
// prefix so far. With `expected`, stops as soon as a smaller prefix exists.
inline bool min_code_search(const LabeledGraph &g, DfsCode &out, const DfsCode *expected) {
  std::vector<Traversal> frontier;
  for (std::uint32_t v = 0; v < g.size(); ++v)
    if (!g.adj[v].empty()) frontier.push_back(start(g, v));
  out.codes.clear();
  for (std::size_t step = 0; step < g.edges.size(); ++step) {
    std::vector<std::pair<std::size_t, Move>> cands;
    for (std::size_t s = 0; s < frontier.size(); ++s)
      for (auto &m : moves(g, frontier[s])) cands.emplace_back(s, m);
    if (cands.empty()) fail(ErrorKind::InvalidGraph, "graph is not connected");
    const EdgeCode *best = &cands.front().second.code;
    for (const auto &c : cands)
      if (compare_edge(c.second.code, *best) < 0) best = &c.second.code;
    const EdgeCode chosen = *best;
    if (expected) {
      const auto c = compare_edge(chosen, expected->codes[step]);
      if (c < 0) return false;
      if (c > 0) fail(ErrorKind::Internal, "code is not a traversal of its own graph");
    }
    out.codes.push_back(chosen);
    std::set<Traversal> next;
    for (const auto &[s, m] : cands)
      if (m.code == chosen) next.insert(apply(frontier[s], m));
    frontier.assign(next.begin(), next.end());
  }
  return true;
}

} // namespace detail

// Minimum DFS code of a connected graph with at least one edge.
inline DfsCode min_dfs_code(const LabeledGraph &g) {
  if (g.edges.empty()) fail(ErrorKind::DegenerateGraph, "edgeless graph has no DFS code");
  DfsCode out;
  detail::min_code_search(g, out, nullptr);
  return out;
}

inline DfsCode min_dfs_code(const Dfg &g) { return min_dfs_code(to_labeled(g)); }

// True iff `code` is the minimum DFS code of the graph it describes.
inline bool is_min(const LabeledGraph &g, const DfsCode &code) {
  DfsCode scratch;
  return detail::min_code_search(g, scratch, &code);
}

// Graph described by a DFS code; vertex ids are discovery indices.
inline LabeledGraph graph_of(const DfsCode &code) {
  LabeledGraph g;
  for (const auto &c : code.codes) {
    if (g.size() == c.from) g.add_vertex(c.from_label);
    if (c.forward() && g.size() == c.to) g.add_vertex(c.to_label);
    const bool fwd = c.edge.dir == Dir::Fwd;
    g.add_edge(fwd ? c.from : c.to, fwd ? c.to : c.from, c.edge.port, c.edge.src_port);
  }
  return g;
}

// Every DFS code of `g` whose traversal visits siblings in label order
// (ties branch), over all roots. Exponential; for tests and oracles.
inline std::set<DfsCode, CodeLess> dfs_codes(const LabeledGraph &g) {
  if (g.edges.empty()) fail(ErrorKind::DegenerateGraph, "edgeless graph has no DFS code");
  if (!is_connected(g)) fail(ErrorKind::InvalidGraph, "graph is not connected");
  std::set<DfsCode, CodeLess> out;
  DfsCode prefix;
  std::function<void(const detail::Traversal &)> walk = [&](const detail::Traversal &t) {
    if (prefix.size() == g.edges.size()) {
      out.insert(prefix);
      return;
    }
    auto ms = detail::moves(g, t);
    // backward edges are listed by target index; forward siblings by label
    auto key = [](const detail::Move &m) {
      return std::make_tuple(m.code.to, m.code.edge, m.code.to_label);
    };
    const auto best = key(*std::min_element(ms.begin(), ms.end(),
                                            [&](const auto &a, const auto &b) { return key(a) < key(b); }));
    for (const auto &m : ms) {
      if (key(m) != best) continue;
      prefix.codes.push_back(m.code);
      walk(detail::apply(t, m));
      prefix.codes.pop_back();
    }
  };
  for (std::uint32_t v = 0; v < g.size(); ++v) walk(detail::start(g, v));
  return out;
}

inline std::set<DfsCode, CodeLess> dfs_codes(const Dfg &g) { return dfs_codes(to_labeled(g)); }

// Canonical identity of any graph, including disconnected and edgeless
// ones: sorted component codes plus the sorted labels of isolated vertices.
struct CanonicalForm {
  std::vector<DfsCode> components;
  std::vector<Label> isolated;
  friend bool operator==(const CanonicalForm &, const CanonicalForm &) = default;
};

inline CanonicalForm canonical_form(const Dfg &g) {
  CanonicalForm cf;
  for (const auto &comp : components(g)) {
    if (comp.size() == 1) {
      bool has_edge = false;
      for (const auto &e : g.edges) has_edge |= (e.src == comp[0] || e.dst == comp[0]);
      if (!has_edge) {
        cf.isolated.push_back(collation_key(g.vertices[comp[0]].op));
        continue;
      }
    }
    LabeledGraph sub;
    std::vector<std::uint32_t> local(g.size(), 0);
    for (auto v : comp) local[v] = sub.add_vertex(collation_key(g.vertices[v].op));
    for (const auto &e : g.edges)
      if (std::binary_search(comp.begin(), comp.end(), e.src))
        sub.add_edge(local[e.src], local[e.dst], e.port, e.src_port);
    cf.components.push_back(min_dfs_code(sub));
  }
  std::sort(cf.components.begin(), cf.components.end(), CodeLess{});
  std::sort(cf.isolated.begin(), cf.isolated.end());
  return cf;
}

inline bool is_isomorphic(const Dfg &g, const Dfg &h) {
  if (g.size() != h.size() || g.edges.size() != h.edges.size()) return false;
  return canonical_form(g) == canonical_form(h);
}

inline std::string to_string(const EdgeCode &c, const std::function<std::string(Label)> &name) {
  std::ostringstream os;
  os << '(' << c.from << ',' << c.to << ',' << name(c.from_label) << ",("
     << (c.edge.dir == Dir::Fwd ? "fwd" : "rev") << ',' << port_name(c.edge.port);
  if (c.edge.src_port) os << ",s" << c.edge.src_port;
  os << ")," << name(c.to_label) << ')';
  return os.str();
}

inline std::string to_string(const DfsCode &code, const std::function<std::string(Label)> &name) {
  std::string s = "[";
  for (std::size_t i = 0; i < code.size(); ++i) s += (i ? " " : "") + to_string(code.codes[i], name);
  return s + "]";
}

inline std::string to_string(const DfsCode &code) {
  return to_string(code, [](Label l) { return format_label(label_from_key(l)); });
}

} // namespace overlayforge::graph
