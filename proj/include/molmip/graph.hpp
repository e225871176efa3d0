#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "molmip/errors.hpp"

namespace molmip {

inline constexpr int kGraphNodeLimit = 31;     // adjacency rows are 32-bit masks
inline constexpr int kCanonicalCap = 8;        // brute-force canonicalization cap

/// Bijection on {0..n-1}. Applied to a graph it maps new label -> old node.
class Permutation {
 public:
  explicit Permutation(std::vector<int> mapping) : map_(std::move(mapping)) {
    std::vector<char> seen(map_.size(), 0);
    for (int v : map_) {
      if (v < 0 || v >= static_cast<int>(map_.size()) || seen[v])
        throw std::domain_error("Permutation: mapping is not a bijection");
      seen[v] = 1;
    }
  }

  static Permutation identity(int n) {
    std::vector<int> m(n);
    std::iota(m.begin(), m.end(), 0);
    return Permutation(std::move(m));
  }

  int size() const { return static_cast<int>(map_.size()); }
  int operator()(int i) const { return map_[i]; }

  Permutation inverse() const {
    std::vector<int> inv(map_.size());
    for (int i = 0; i < size(); ++i) inv[map_[i]] = i;
    return Permutation(std::move(inv));
  }

 private:
  std::vector<int> map_;
};

/// Undirected graph over {0..n-1} with optional 0/1 node features. The matrix
/// view has a true diagonal by convention (every node exists); the stored
/// masks hold only the off-diagonal neighbor bits.
struct UndirectedGraph {
  int n = 0;
  int f = 0;
  std::vector<std::uint32_t> adj;                   // bit u of adj[v]: edge u-v, u != v
  std::vector<std::vector<std::uint8_t>> features;  // n rows of f entries in {0,1}

  static UndirectedGraph make(int n, int f = 0) {
    if (n < 0 || n > kGraphNodeLimit) throw std::domain_error("UndirectedGraph: bad node count");
    if (f < 0 || f > 32) throw std::domain_error("UndirectedGraph: bad feature count");
    UndirectedGraph g;
    g.n = n;
    g.f = f;
    g.adj.assign(static_cast<std::size_t>(n), 0u);
    if (f > 0) g.features.assign(static_cast<std::size_t>(n), std::vector<std::uint8_t>(f, 0));
    return g;
  }

  void add_edge(int u, int v) {
    if (u == v) throw std::domain_error("add_edge: no self loops");
    check_node(u);
    check_node(v);
    adj[u] |= 1u << v;
    adj[v] |= 1u << u;
  }

  bool has_edge(int u, int v) const {
    check_node(u);
    check_node(v);
    if (u == v) return false;
    return (adj[u] >> v) & 1u;
  }

  int degree(int v) const {
    check_node(v);
    return std::popcount(adj[v]);
  }

  bool connected() const {
    if (n == 0) return false;
    std::uint32_t seen = 1u, frontier = 1u;
    while (frontier != 0) {
      std::uint32_t next = 0;
      for (std::uint32_t rest = frontier; rest != 0; rest &= rest - 1)
        next |= adj[std::countr_zero(rest)];
      frontier = next & ~seen;
      seen |= next;
    }
    return seen == (n >= 32 ? ~0u : (1u << n) - 1u);
  }

  void check_node(int v) const {
    if (v < 0 || v >= n) throw std::domain_error("node id out of range");
  }
};

/// Relabeled copy: edge(u,v) of the result equals edge(p(u), p(v)) of g and
/// feature row v of the result is row p(v) of g.
inline UndirectedGraph permute(const UndirectedGraph& g, const Permutation& p) {
  if (p.size() != g.n) throw std::domain_error("permute: size mismatch");
  UndirectedGraph out = UndirectedGraph::make(g.n, g.f);
  for (int v = 0; v < g.n; ++v) {
    if (g.f > 0) out.features[v] = g.features[p(v)];
    for (int u = v + 1; u < g.n; ++u)
      if (g.has_edge(p(u), p(v))) out.add_edge(u, v);
  }
  return out;
}

namespace detail {

/// Encoding of (features, adjacency) under the relabeling "new v is old p[v]".
inline std::string encode_graph(const UndirectedGraph& g, const std::vector<int>& p) {
  std::string out;
  out.reserve(static_cast<std::size_t>(g.n) * (g.f + g.n) / 4 + 8);
  out.push_back(static_cast<char>(g.n));
  out.push_back(static_cast<char>(g.f));
  for (int v = 0; v < g.n; ++v) {
    if (g.f > 0) {
      std::uint32_t row = 0;
      for (int k = 0; k < g.f; ++k) row = (row << 1) | (g.features[p[v]][k] ? 1u : 0u);
      out.push_back(static_cast<char>((row >> 24) & 0xff));
      out.push_back(static_cast<char>((row >> 16) & 0xff));
      out.push_back(static_cast<char>((row >> 8) & 0xff));
      out.push_back(static_cast<char>(row & 0xff));
    }
    std::uint32_t bits = 0;
    int nbits = 0;
    for (int u = 0; u < v; ++u) {
      bits = (bits << 1) | (g.has_edge(p[u], p[v]) ? 1u : 0u);
      if (++nbits == 8) {
        out.push_back(static_cast<char>(bits));
        bits = 0;
        nbits = 0;
      }
    }
    if (nbits > 0) out.push_back(static_cast<char>(bits << (8 - nbits)));
  }
  return out;
}

}  // namespace detail

/// Byte string identical for two graphs exactly when they are isomorphic
/// (features included): the minimum encoding over all n! relabelings.
inline std::string canonical_form(const UndirectedGraph& g, int cap = kCanonicalCap) {
  if (g.n > cap)
    throw UnsupportedError("canonical_form: " + std::to_string(g.n) + " nodes exceeds cap " +
                           std::to_string(cap));
  std::vector<int> p(g.n);
  std::iota(p.begin(), p.end(), 0);
  std::string best = detail::encode_graph(g, p);
  while (std::next_permutation(p.begin(), p.end())) {
    std::string cand = detail::encode_graph(g, p);
    if (cand < best) best = std::move(cand);
  }
  return best;
}

inline bool is_isomorphic(const UndirectedGraph& a, const UndirectedGraph& b,
                          int cap = kCanonicalCap) {
  if (a.n != b.n || a.f != b.f) return false;
  return canonical_form(a, cap) == canonical_form(b, cap);
}

/// Text fixture: first line "N F", then N feature rows (omitted when F = 0),
/// then N adjacency rows; 0/1 entries separated by spaces, diagonal all 1.
inline UndirectedGraph read_graph(std::istream& in) {
  int n = 0, f = 0;
  if (!(in >> n >> f)) throw ParseError("graph fixture: expected header 'N F'");
  if (n < 1 || n > kGraphNodeLimit) throw ParseError("graph fixture: bad node count");
  if (f < 0) throw ParseError("graph fixture: bad feature count");
  UndirectedGraph g = UndirectedGraph::make(n, f);
  auto read_bit = [&](const char* what, int row, int col) {
    int b = 0;
    if (!(in >> b) || (b != 0 && b != 1))
      throw ParseError(std::string("graph fixture: bad ") + what + " entry at row " +
                       std::to_string(row) + ", col " + std::to_string(col));
    return b;
  };
  for (int v = 0; v < n; ++v)
    for (int k = 0; k < f; ++k) g.features[v][k] = static_cast<std::uint8_t>(read_bit("feature", v, k));
  std::vector<std::vector<int>> m(n, std::vector<int>(n));
  for (int v = 0; v < n; ++v)
    for (int u = 0; u < n; ++u) m[v][u] = read_bit("adjacency", v, u);
  for (int v = 0; v < n; ++v) {
    if (m[v][v] != 1) throw ParseError("graph fixture: diagonal must be 1");
    for (int u = v + 1; u < n; ++u) {
      if (m[v][u] != m[u][v]) throw ParseError("graph fixture: adjacency not symmetric");
      if (m[v][u]) g.add_edge(u, v);
    }
  }
  return g;
}

inline void write_graph(std::ostream& out, const UndirectedGraph& g) {
  out << g.n << ' ' << g.f << '\n';
  for (int v = 0; v < g.n; ++v) {
    for (int k = 0; k < g.f; ++k) out << (k ? " " : "") << int(g.features[v][k]);
    if (g.f > 0) out << '\n';
  }
  for (int v = 0; v < g.n; ++v) {
    for (int u = 0; u < g.n; ++u) out << (u ? " " : "") << (u == v ? 1 : (g.has_edge(u, v) ? 1 : 0));
    out << '\n';
  }
}

}  // namespace molmip
