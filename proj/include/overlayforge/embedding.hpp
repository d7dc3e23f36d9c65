#pragma once

#include <algorithm>
#include <tuple>
#include <vector>

#include "overlayforge/dfg.hpp"

namespace overlayforge::graph {

struct Embedding {
  std::size_t graph_index = 0;
  std::vector<std::size_t> vmap; // pattern vertex -> host vertex
  friend auto operator<=>(const Embedding &, const Embedding &) = default;
};

inline constexpr std::size_t kOracleCap = 12;

// Every label- and edge-preserving injective map from `pattern` into `host`,
// by exhaustive backtracking. A test oracle, refuses graphs above `cap`.
inline std::vector<Embedding> oracle_embeddings(const Dfg &pattern, const Dfg &host, std::size_t graph_index = 0,
                                                std::size_t cap = kOracleCap) {
  if (pattern.size() > cap || host.size() > cap)
    fail(ErrorKind::OracleLimit, "oracle refuses graphs above ", cap, " vertices (pattern ", pattern.size(),
         ", host ", host.size(), ")");
  auto key = [](const Edge &e) { return std::make_tuple(e.src, e.dst, e.port, e.src_port); };
  std::vector<std::tuple<std::size_t, std::size_t, std::uint32_t, std::uint32_t>> hk;
  for (const auto &e : host.edges) hk.push_back(key(e));
  std::sort(hk.begin(), hk.end());

  std::vector<Embedding> out;
  std::vector<std::size_t> vmap(pattern.size());
  std::vector<bool> taken(host.size(), false);
  auto consistent = [&](std::size_t p) {
    // every pattern edge between already-mapped vertices must exist in host
    for (const auto &e : pattern.edges) {
      if (e.src > p || e.dst > p || (e.src != p && e.dst != p)) continue;
      if (!std::binary_search(hk.begin(), hk.end(), std::make_tuple(vmap[e.src], vmap[e.dst], e.port, e.src_port)))
        return false;
    }
    return true;
  };
  auto rec = [&](auto &&self, std::size_t p) -> void {
    if (p == pattern.size()) {
      out.push_back({graph_index, vmap});
      return;
    }
    for (std::size_t h = 0; h < host.size(); ++h) {
      if (taken[h] || !(host.vertices[h].op == pattern.vertices[p].op)) continue;
      vmap[p] = h;
      if (!consistent(p)) continue;
      taken[h] = true;
      self(self, p + 1);
      taken[h] = false;
    }
  };
  if (!pattern.empty()) rec(rec, 0);
  return out;
}

} // namespace overlayforge::graph
