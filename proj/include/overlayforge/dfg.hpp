#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "overlayforge/common.hpp"
#include "overlayforge/ops.hpp"

namespace overlayforge::graph {

struct Vertex {
  OpLabel op;
  std::uint32_t arity = 0; // operand ports 0..arity-1

  std::string label() const { return format_label(op); }
  friend bool operator==(const Vertex &, const Vertex &) = default;
};

// Data flows src -> dst into operand `port` of dst. `src_port` selects one of
// several results of the source (only multi-lane demux nodes have more than one).
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::uint32_t port = 0;
  std::uint32_t src_port = 0;
  friend bool operator==(const Edge &, const Edge &) = default;
};

struct ExtInput {
  std::size_t dst = 0;
  std::uint32_t port = 0;
  std::string tag; // same tag = same external value
  friend bool operator==(const ExtInput &, const ExtInput &) = default;
};

struct ExtOutput {
  std::size_t src = 0;
  std::string tag;
  std::uint32_t src_port = 0;
  friend bool operator==(const ExtOutput &, const ExtOutput &) = default;
};

// Where a graph built from IR came from: one instruction index per vertex.
struct DfgOrigin {
  std::size_t function = 0;
  std::size_t block = 0;
  std::vector<std::size_t> instruction;
  friend bool operator==(const DfgOrigin &, const DfgOrigin &) = default;
};

class Dfg {
public:
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::vector<ExtInput> ext_inputs;
  std::vector<ExtOutput> ext_outputs;
  std::optional<DfgOrigin> origin;

  std::size_t add_vertex(OpLabel op, std::optional<std::uint32_t> arity = std::nullopt) {
    vertices.push_back({op, arity.value_or(static_cast<std::uint32_t>(ops::fixed_arity(op.kind.op).value_or(0)))});
    return vertices.size() - 1;
  }
  std::size_t add_vertex(std::string_view label) {
    auto l = parse_label(label);
    if (!l) fail(ErrorKind::InvalidGraph, "bad vertex label '", label, "'");
    return add_vertex(*l);
  }
  void add_edge(std::size_t src, std::size_t dst, std::uint32_t port, std::uint32_t src_port = 0) {
    edges.push_back({src, dst, port, src_port});
  }
  void add_input(std::size_t dst, std::uint32_t port, std::string tag) {
    ext_inputs.push_back({dst, port, std::move(tag)});
  }
  void add_output(std::size_t src, std::string tag, std::uint32_t src_port = 0) {
    ext_outputs.push_back({src, std::move(tag), src_port});
  }

  std::size_t size() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }

  // Distinct external-input tags in first-appearance order: the kernel's
  // declared input order.
  std::vector<std::string> input_tags() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto &in : ext_inputs)
      if (seen.insert(in.tag).second) out.push_back(in.tag);
    return out;
  }

  std::vector<std::vector<std::size_t>> out_edges() const {
    std::vector<std::vector<std::size_t>> adj(vertices.size());
    for (std::size_t e = 0; e < edges.size(); ++e) adj[edges[e].src].push_back(e);
    return adj;
  }
  std::vector<std::vector<std::size_t>> in_edges() const {
    std::vector<std::vector<std::size_t>> adj(vertices.size());
    for (std::size_t e = 0; e < edges.size(); ++e) adj[edges[e].dst].push_back(e);
    return adj;
  }

  // Kahn order; nullopt when the internal edges contain a cycle.
  std::optional<std::vector<std::size_t>> topo_order() const {
    std::vector<std::size_t> indeg(vertices.size(), 0), order;
    for (const auto &e : edges) ++indeg[e.dst];
    const auto adj = out_edges();
    std::vector<std::size_t> ready;
    for (std::size_t v = vertices.size(); v-- > 0;)
      if (indeg[v] == 0) ready.push_back(v);
    while (!ready.empty()) {
      // smallest id first keeps the order deterministic
      std::sort(ready.begin(), ready.end(), std::greater<>());
      const auto v = ready.back();
      ready.pop_back();
      order.push_back(v);
      for (auto e : adj[v])
        if (--indeg[edges[e].dst] == 0) ready.push_back(edges[e].dst);
    }
    if (order.size() != vertices.size()) return std::nullopt;
    return order;
  }

  // Checks endpoint ranges, at most one driver per (dst, port) and acyclicity.
  void validate() const {
    std::set<std::pair<std::size_t, std::uint32_t>> driven;
    auto drive = [&](std::size_t dst, std::uint32_t port) {
      if (dst >= vertices.size()) fail(ErrorKind::InvalidGraph, "edge into missing vertex ", dst);
      if (!driven.insert({dst, port}).second)
        fail(ErrorKind::InvalidGraph, "vertex ", dst, " port ", port, " has more than one driver");
    };
    for (const auto &e : edges) {
      if (e.src >= vertices.size()) fail(ErrorKind::InvalidGraph, "edge from missing vertex ", e.src);
      drive(e.dst, e.port);
    }
    for (const auto &in : ext_inputs) drive(in.dst, in.port);
    for (const auto &out : ext_outputs)
      if (out.src >= vertices.size()) fail(ErrorKind::InvalidGraph, "output from missing vertex ", out.src);
    if (!topo_order()) fail(ErrorKind::Cyclic, "internal edges form a cycle");
  }

  friend bool operator==(const Dfg &, const Dfg &) = default;
};

inline std::string port_name(std::uint32_t port) {
  if (port == 0) return "L";
  if (port == 1) return "R";
  return "P" + std::to_string(port);
}

inline std::optional<std::uint32_t> parse_port(std::string_view s) {
  if (s == "L") return 0u;
  if (s == "R") return 1u;
  if (s.size() < 2 || s[0] != 'P') return std::nullopt;
  std::uint32_t v = 0;
  for (char c : s.substr(1)) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint32_t>(c - '0');
  }
  if (v < 2) return std::nullopt;
  return v;
}

// Interchange text: "v <id> <label>" and "e <id> <src> <dst> <port>" lines.
// External inputs and outputs become vertices labeled "in" / "out"; each
// distinct input tag is one "in" vertex.
inline std::string write_dfg(const Dfg &g) {
  std::ostringstream os;
  const auto tags = g.input_tags();
  std::map<std::string, std::size_t> in_id;
  for (std::size_t v = 0; v < g.vertices.size(); ++v) os << "v " << v << ' ' << g.vertices[v].label() << '\n';
  std::size_t next = g.vertices.size();
  for (const auto &t : tags) {
    in_id[t] = next;
    os << "v " << next++ << " in\n";
  }
  const std::size_t first_out = next;
  for (std::size_t i = 0; i < g.ext_outputs.size(); ++i) os << "v " << next++ << " out\n";
  std::size_t eid = 0;
  for (const auto &e : g.edges) {
    if (e.src_port != 0) fail(ErrorKind::InvalidGraph, "multi-result edges have no interchange form");
    os << "e " << eid++ << ' ' << e.src << ' ' << e.dst << ' ' << port_name(e.port) << '\n';
  }
  for (const auto &in : g.ext_inputs)
    os << "e " << eid++ << ' ' << in_id[in.tag] << ' ' << in.dst << ' ' << port_name(in.port) << '\n';
  for (std::size_t i = 0; i < g.ext_outputs.size(); ++i) {
    if (g.ext_outputs[i].src_port != 0) fail(ErrorKind::InvalidGraph, "multi-result outputs have no interchange form");
    os << "e " << eid++ << ' ' << g.ext_outputs[i].src << ' ' << first_out + i << " L\n";
  }
  return os.str();
}

inline Dfg read_dfg(std::string_view text) {
  Dfg g;
  std::map<long long, std::size_t> real;
  std::map<long long, std::string> in_tag;
  std::map<long long, std::size_t> out_index;
  std::vector<std::pair<long long, long long>> out_edges; // (src id, out vertex id)
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  auto bad = [&](const std::string &msg) { throw ParseError(ErrorKind::Syntax, msg, lineno, 1); };
  struct PendingEdge {
    long long src, dst;
    std::uint32_t port;
  };
  std::vector<PendingEdge> pending;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind) || kind[0] == '#') continue;
    if (kind == "v") {
      long long id;
      std::string label;
      if (!(ls >> id >> label)) bad("malformed vertex line");
      if (real.count(id) || in_tag.count(id) || out_index.count(id)) bad("duplicate vertex id");
      if (label == "in") {
        in_tag[id] = "in" + std::to_string(in_tag.size());
      } else if (label == "out") {
        const auto k = out_index.size();
        out_index[id] = k;
      } else {
        auto l = parse_label(label);
        if (!l) bad("unknown vertex label '" + label + "'");
        real[id] = g.add_vertex(*l);
      }
    } else if (kind == "e") {
      long long id, src, dst;
      std::string port;
      if (!(ls >> id >> src >> dst >> port)) bad("malformed edge line");
      auto p = parse_port(port);
      if (!p) bad("bad port '" + port + "'");
      pending.push_back({src, dst, *p});
    } else {
      bad("line must start with 'v' or 'e'");
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> outs; // (out index, src)
  for (const auto &e : pending) {
    if (in_tag.count(e.src) && real.count(e.dst)) {
      g.add_input(real[e.dst], e.port, in_tag[e.src]);
    } else if (real.count(e.src) && out_index.count(e.dst)) {
      outs.emplace_back(out_index[e.dst], real[e.src]);
    } else if (real.count(e.src) && real.count(e.dst)) {
      g.add_edge(real[e.src], real[e.dst], e.port);
    } else {
      throw ParseError(ErrorKind::Syntax, "edge references unknown or misplaced vertex", lineno, 1);
    }
  }
  std::sort(outs.begin(), outs.end());
  for (const auto &[k, src] : outs) g.add_output(src, "out" + std::to_string(k));
  // Variadic vertices take their arity from the highest driven port.
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    if (ops::fixed_arity(g.vertices[v].op.kind.op)) continue;
    std::uint32_t a = 0;
    for (const auto &e : g.edges)
      if (e.dst == v) a = std::max(a, e.port + 1);
    for (const auto &in : g.ext_inputs)
      if (in.dst == v) a = std::max(a, in.port + 1);
    g.vertices[v].arity = a;
  }
  g.validate();
  return g;
}

// Relabels vertex ids by `perm` (new id of old vertex v is perm[v]).
inline Dfg permute(const Dfg &g, const std::vector<std::size_t> &perm) {
  Dfg h;
  h.vertices.resize(g.vertices.size());
  for (std::size_t v = 0; v < g.vertices.size(); ++v) h.vertices[perm[v]] = g.vertices[v];
  for (const auto &e : g.edges) h.add_edge(perm[e.src], perm[e.dst], e.port, e.src_port);
  for (const auto &in : g.ext_inputs) h.add_input(perm[in.dst], in.port, in.tag);
  for (const auto &out : g.ext_outputs) h.add_output(perm[out.src], out.tag, out.src_port);
  return h;
}

// Connected components over internal edges, ignoring direction.
inline std::vector<std::vector<std::size_t>> components(const Dfg &g) {
  std::vector<std::size_t> parent(g.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto &e : g.edges) parent[find(e.src)] = find(e.dst);
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t v = 0; v < g.size(); ++v) groups[find(v)].push_back(v);
  std::vector<std::vector<std::size_t>> out;
  for (auto &[root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace overlayforge::graph
