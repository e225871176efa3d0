#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "molmip/graph.hpp"
#include "molmip/lexorder.hpp"

namespace molmip {

/// Final node -> index bijection.
struct Indexing {
  std::vector<int> index_of;

  int n() const { return static_cast<int>(index_of.size()); }

  /// Inverse mapping index -> node.
  std::vector<int> node_at() const {
    std::vector<int> at(index_of.size());
    for (int v = 0; v < n(); ++v) at[index_of[v]] = v;
    return at;
  }
};

/// One iteration of the indexing loop. Vectors over the unindexed set are
/// parallel to `unindexed` (ascending node ids); `temp_index` covers all nodes.
struct TraceIteration {
  int s = 0;
  std::vector<int> indexed;                         // nodes indexed so far, by index order
  std::vector<int> unindexed;                       // remaining nodes, ascending id
  std::vector<std::vector<int>> indexed_neighbors;  // sorted indexes of already-indexed neighbors
  std::vector<int> rank;                            // dense rank of the order above
  std::vector<int> temp_index;                      // temporary index for every node
  std::vector<std::vector<int>> temp_neighbors;     // sorted temporary indexes of all neighbors
  int chosen = -1;                                  // node receiving index s
};

struct IndexingTrace {
  std::vector<TraceIteration> iterations;
};

/// Every node with index >= 1 has a neighbor with a smaller index.
inline bool check_s1(const UndirectedGraph& g, const Indexing& idx) {
  for (int v = 0; v < g.n; ++v) {
    if (idx.index_of[v] == 0) continue;
    bool ok = false;
    for (std::uint32_t rest = g.adj[v]; rest != 0; rest &= rest - 1)
      if (idx.index_of[std::countr_zero(rest)] < idx.index_of[v]) {
        ok = true;
        break;
      }
    if (!ok) return false;
  }
  return true;
}

/// Row 0 has the minimal hierarchy value h(x) = sum_f w_f * x_f.
inline bool check_s2(const std::vector<std::vector<std::uint8_t>>& features,
                     const std::vector<double>& weights) {
  if (features.empty()) return true;
  auto h = [&](const std::vector<std::uint8_t>& row) {
    if (row.size() != weights.size()) throw std::domain_error("check_s2: row width mismatch");
    double s = 0;
    for (std::size_t k = 0; k < row.size(); ++k) s += weights[k] * row[k];
    return s;
  };
  const double h0 = h(features[0]);
  for (std::size_t v = 1; v < features.size(); ++v)
    if (h(features[v]) < h0) return false;
  return true;
}

/// Weights 2^(F-1-f): the universal ordering vector over F binary features.
inline std::vector<double> hierarchy_weights(int f) {
  std::vector<double> w(f);
  for (int k = 0; k < f; ++k) w[k] = std::ldexp(1.0, f - 1 - k);
  return w;
}

namespace detail {

/// Sorted indexes of the neighbors of the node holding index v, with one
/// occurrence of `drop` removed when present.
inline std::vector<int> neighbor_indexes(const UndirectedGraph& g, const Indexing& idx, int node,
                                         int drop) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(g.degree(node)));
  for (std::uint32_t rest = g.adj[node]; rest != 0; rest &= rest - 1) {
    int w = idx.index_of[std::countr_zero(rest)];
    if (w != drop) out.push_back(w);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Neighbor-set order constraint over consecutive indexes: for each index v in
/// 1..N-2, the neighbor indexes of v (ignoring v+1) compare as less-or-equal
/// to the neighbor indexes of v+1 (ignoring v), with M = N and L = N-1.
inline bool check_s3(const UndirectedGraph& g, const Indexing& idx) {
  const std::vector<int> at = idx.node_at();
  for (int v = 1; v + 1 < g.n; ++v) {
    std::vector<int> a = detail::neighbor_indexes(g, idx, at[v], v + 1);
    std::vector<int> b = detail::neighbor_indexes(g, idx, at[v + 1], v);
    if (detail::compare_sorted(a, b) == std::strong_ordering::greater) return false;
  }
  return true;
}

/// Construct an indexing rooted at `root` by repeatedly choosing the unindexed
/// node whose temporary neighbor multiset has minimal order; ties go to the
/// lowest node id. Requires a connected graph. The trace records every
/// iteration.
inline std::pair<Indexing, IndexingTrace> index_graph(const UndirectedGraph& g, int root = 0) {
  if (g.n == 0) throw std::domain_error("index_graph: empty graph");
  g.check_node(root);
  if (!g.connected()) throw std::domain_error("index_graph: graph is not connected");

  const int n = g.n;
  Indexing idx;
  idx.index_of.assign(n, -1);
  idx.index_of[root] = 0;
  IndexingTrace trace;
  std::vector<int> indexed = {root};

  for (int s = 1; s < n; ++s) {
    TraceIteration it;
    it.s = s;
    it.indexed = indexed;
    for (int v = 0; v < n; ++v)
      if (idx.index_of[v] < 0) it.unindexed.push_back(v);

    // Indexed-neighbor multisets and their dense ranks.
    for (int v : it.unindexed) {
      std::vector<int> ns;
      for (std::uint32_t rest = g.adj[v]; rest != 0; rest &= rest - 1) {
        int u = std::countr_zero(rest);
        if (idx.index_of[u] >= 0) ns.push_back(idx.index_of[u]);
      }
      std::sort(ns.begin(), ns.end());
      it.indexed_neighbors.push_back(std::move(ns));
    }
    const int m = static_cast<int>(it.unindexed.size());
    it.rank.assign(m, 0);
    for (int i = 0; i < m; ++i) {
      // Count distinct strictly smaller orders among the unindexed nodes.
      int r = 0;
      for (int j = 0; j < m; ++j) {
        if (detail::compare_sorted(it.indexed_neighbors[j], it.indexed_neighbors[i]) !=
            std::strong_ordering::less)
          continue;
        bool first_holder = true;
        for (int k = 0; k < j; ++k)
          if (it.indexed_neighbors[k] == it.indexed_neighbors[j]) {
            first_holder = false;
            break;
          }
        if (first_holder) ++r;
      }
      it.rank[i] = r;
    }

    it.temp_index.assign(n, 0);
    for (int v = 0; v < n; ++v)
      if (idx.index_of[v] >= 0) it.temp_index[v] = idx.index_of[v];
    for (int i = 0; i < m; ++i) it.temp_index[it.unindexed[i]] = s + it.rank[i];

    for (int v : it.unindexed) {
      std::vector<int> ts;
      for (std::uint32_t rest = g.adj[v]; rest != 0; rest &= rest - 1)
        ts.push_back(it.temp_index[std::countr_zero(rest)]);
      std::sort(ts.begin(), ts.end());
      it.temp_neighbors.push_back(std::move(ts));
    }

    int best = 0;
    for (int i = 1; i < m; ++i)
      if (detail::compare_sorted(it.temp_neighbors[i], it.temp_neighbors[best]) ==
          std::strong_ordering::less)
        best = i;
    it.chosen = it.unindexed[best];
    idx.index_of[it.chosen] = s;
    indexed.push_back(it.chosen);
    trace.iterations.push_back(std::move(it));
  }
  return {idx, trace};
}

/// Constraint selection for the labeling counter.
struct IndexingConstraints {
  bool s1 = false;
  bool fixed_root = false;
  bool s3 = false;
};

/// Exact number of node -> index bijections satisfying the selected
/// constraints, by exhaustive enumeration of all N! labelings.
inline long long count_indexings(const UndirectedGraph& g, const IndexingConstraints& c,
                                 int root = 0, int cap = kCanonicalCap) {
  if (g.n > cap)
    throw std::domain_error("count_indexings: node count exceeds cap " + std::to_string(cap));
  g.check_node(root);
  std::vector<int> perm(g.n);
  std::iota(perm.begin(), perm.end(), 0);
  long long count = 0;
  Indexing idx;
  do {
    if (c.fixed_root && perm[root] != 0) continue;
    idx.index_of = perm;
    if (c.s1 && !check_s1(g, idx)) continue;
    if (c.s3 && !check_s3(g, idx)) continue;
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return count;
}

}  // namespace molmip
