#pragma once

#include <numeric>
#include <vector>

#include "qext/rng.hpp"

namespace qext::ham {

// directed graph without self-loops, dense adjacency
struct graph {
  uint32_t n = 0;
  std::vector<uint8_t> adj;  // adj[u * n + v]

  graph() = default;
  explicit graph(uint32_t n_) : n(n_), adj(size_t(n_) * n_, 0) {}

  bool edge(uint32_t u, uint32_t v) const { return adj[size_t(u) * n + v] != 0; }
  void set(uint32_t u, uint32_t v, bool on = true) { adj[size_t(u) * n + v] = on; }

  std::vector<std::vector<uint32_t>> adjacency_list() const {
    std::vector<std::vector<uint32_t>> out(n);
    for (uint32_t u = 0; u < n; ++u)
      for (uint32_t v = 0; v < n; ++v)
        if (edge(u, v)) out[u].push_back(v);
    return out;
  }

  bytes serialize() const {
    writer w;
    w.u32(n);
    w.raw(from_bits(adj));
    return w.take();
  }
  static graph deserialize(reader& r) {
    uint32_t n = r.u32();
    if (n < 2 || n > 64) throw decode_error("graph size out of range");
    graph g(n);
    auto bits = to_bits(r.raw((size_t(n) * n + 7) / 8), size_t(n) * n);
    for (size_t i = 0; i < bits.size(); ++i) g.adj[i] = bits[i];
    for (uint32_t u = 0; u < n; ++u)
      if (g.edge(u, u)) throw decode_error("graph has a self-loop");
    return g;
  }

  bool operator==(const graph&) const = default;
};

// vertex order of a Hamiltonian cycle
using cycle = std::vector<uint32_t>;
using perm = std::vector<uint32_t>;

inline bool is_perm(const std::vector<uint32_t>& p, uint32_t n) {
  if (p.size() != n) return false;
  std::vector<uint8_t> seen(n, 0);
  for (auto v : p) {
    if (v >= n || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

inline bool is_cycle(const graph& g, const cycle& c) {
  if (!is_perm(c, g.n)) return false;
  for (uint32_t i = 0; i < g.n; ++i)
    if (!g.edge(c[i], c[(i + 1) % g.n])) return false;
  return true;
}

inline perm random_perm(uint32_t n, rng& r) {
  perm p(n);
  std::iota(p.begin(), p.end(), 0u);
  shuffle(p, r);
  return p;
}

// edge (u, v) of g becomes (pi[u], pi[v])
inline graph permute(const graph& g, const perm& pi) {
  graph out(g.n);
  for (uint32_t u = 0; u < g.n; ++u)
    for (uint32_t v = 0; v < g.n; ++v)
      if (g.edge(u, v)) out.set(pi[u], pi[v]);
  return out;
}

// graph holding exactly the edges of the cycle
inline graph cycle_graph(const cycle& c) {
  graph g(uint32_t(c.size()));
  for (size_t i = 0; i < c.size(); ++i) g.set(c[i], c[(i + 1) % c.size()]);
  return g;
}

// random graph with a planted cycle; extra edges with probability 1/4
inline std::pair<graph, cycle> planted(uint32_t n, rng& r) {
  if (n < 3) throw config_error("graph needs at least 3 vertices");
  auto c = random_perm(n, r);
  auto g = cycle_graph(c);
  for (uint32_t u = 0; u < n; ++u)
    for (uint32_t v = 0; v < n; ++v)
      if (u != v && r.below(4) == 0) g.set(u, v);
  // start the cycle at vertex 0
  auto at = std::find(c.begin(), c.end(), 0u);
  std::rotate(c.begin(), at, c.end());
  return {g, c};
}

// dense random graph with no Hamiltonian cycle: vertex 0 has no incoming edge
inline graph non_member(uint32_t n, rng& r) {
  if (n < 3) throw config_error("graph needs at least 3 vertices");
  graph g(n);
  for (uint32_t u = 1; u < n; ++u)
    for (uint32_t v = 0; v < n; ++v)
      if (u != v && v != 0 && r.below(2) == 0) g.set(u, v);
  for (uint32_t v = 1; v < n; ++v) g.set(0, v, r.bit());
  return g;
}

}  // namespace qext::ham
