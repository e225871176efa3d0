#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "molmip/indexing.hpp"
#include "molmip/selftest.hpp"
#include "test_util.hpp"

using namespace molmip;
using namespace testutil;

namespace {

/// Subset-DP count of labelings where every index >= 1 has an earlier
/// neighbor; independent of the permutation-scan implementation.
long long search_order_count(const UndirectedGraph& g) {
  const int n = g.n;
  std::vector<long long> ways(1u << n, 0);
  for (int v = 0; v < n; ++v) ways[1u << v] = 1;
  for (std::uint32_t s = 1; s < (1u << n); ++s) {
    if (ways[s] == 0) continue;
    for (int v = 0; v < n; ++v)
      if (!((s >> v) & 1u) && (g.adj[v] & s)) ways[s | (1u << v)] += ways[s];
  }
  return ways[(1u << n) - 1];
}

Indexing labeling(std::vector<int> index_of) { return Indexing{std::move(index_of)}; }

}  // namespace

TEST_CASE("reference-graph indexing matches the golden trace") {
  const UndirectedGraph g = reference_graph();
  const auto [idx, trace] = index_graph(g, 0);

  CHECK(idx.index_of == std::vector<int>{0, 1, 4, 2, 3, 5});
  REQUIRE(trace.iterations.size() == 5);

  const auto& s1 = trace.iterations[0];
  CHECK(s1.unindexed == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(s1.indexed_neighbors ==
        std::vector<std::vector<int>>{{0}, {0}, {0}, {0}, {0}});
  CHECK(s1.rank == std::vector<int>{0, 0, 0, 0, 0});
  CHECK(s1.temp_index == std::vector<int>{0, 1, 1, 1, 1, 1});
  CHECK(s1.temp_neighbors ==
        std::vector<std::vector<int>>{{0, 1, 1, 1}, {0, 1, 1}, {0, 1, 1}, {0, 1, 1}, {0, 1}});
  CHECK(s1.chosen == 1);

  const auto& s2 = trace.iterations[1];
  CHECK(s2.unindexed == std::vector<int>{2, 3, 4, 5});
  CHECK(s2.indexed_neighbors == std::vector<std::vector<int>>{{0, 1}, {0, 1}, {0, 1}, {0}});
  CHECK(s2.rank == std::vector<int>{0, 0, 0, 1});
  CHECK(s2.temp_index == std::vector<int>{0, 1, 2, 2, 2, 3});
  CHECK(s2.temp_neighbors ==
        std::vector<std::vector<int>>{{0, 1, 3}, {0, 1, 2}, {0, 1, 2}, {0, 2}});
  CHECK(s2.chosen == 3);

  const auto& s3 = trace.iterations[2];
  CHECK(s3.unindexed == std::vector<int>{2, 4, 5});
  CHECK(s3.rank == std::vector<int>{1, 0, 2});
  CHECK(s3.temp_index == std::vector<int>{0, 1, 4, 2, 3, 5});
  CHECK(s3.temp_neighbors == std::vector<std::vector<int>>{{0, 1, 5}, {0, 1, 2}, {0, 4}});
  CHECK(s3.chosen == 4);

  const auto& s4 = trace.iterations[3];
  CHECK(s4.rank == std::vector<int>{0, 1});
  CHECK(s4.chosen == 2);
  CHECK(trace.iterations[4].chosen == 5);

  CHECK(check_s3(g, idx));
  CHECK(check_s1(g, idx));
}

TEST_CASE("index_graph handles simple graphs and bad input") {
  const auto [idx, tr] = index_graph(path_graph(3), 0);
  CHECK(idx.index_of == std::vector<int>{0, 1, 2});

  UndirectedGraph disconnected = UndirectedGraph::make(4);
  disconnected.add_edge(0, 1);
  disconnected.add_edge(2, 3);
  CHECK_THROWS_AS(index_graph(disconnected, 0), std::domain_error);
  CHECK_THROWS_AS(index_graph(UndirectedGraph::make(0), 0), std::domain_error);
}

TEST_CASE("4-cycle indexing lands in the feasible set of labelings") {
  const auto g = cycle_graph(4);
  for (int root = 0; root < 4; ++root) {
    const auto [idx, tr] = index_graph(g, root);
    CHECK(idx.index_of[root] == 0);
    CHECK(check_s3(g, idx));
    // Enumerate all completions with the root fixed and collect the feasible
    // labelings; the construction must be one of them.
    std::vector<int> others;
    for (int v = 0; v < 4; ++v)
      if (v != root) others.push_back(v);
    std::sort(others.begin(), others.end());
    bool found = false;
    do {
      Indexing cand;
      cand.index_of.assign(4, 0);
      for (int i = 0; i < 3; ++i) cand.index_of[others[i]] = i + 1;
      if (check_s3(g, cand) && cand.index_of == idx.index_of) found = true;
    } while (std::next_permutation(others.begin(), others.end()));
    CHECK(found);
  }
}

TEST_CASE("check_s1 examples") {
  CHECK(check_s1(path_graph(3), labeling({0, 1, 2})));
  UndirectedGraph two_edges = UndirectedGraph::make(4);
  two_edges.add_edge(0, 1);
  two_edges.add_edge(2, 3);
  CHECK_FALSE(check_s1(two_edges, labeling({0, 1, 2, 3})));
}

TEST_CASE("check_s2 examples") {
  const std::vector<std::vector<std::uint8_t>> same = {{1, 0}, {1, 0}, {1, 0}};
  CHECK(check_s2(same, {2.0, 1.0}));

  const auto w = hierarchy_weights(3);
  CHECK(w == std::vector<double>{4.0, 2.0, 1.0});
  // Row 0 is the lexicographically smallest bit row.
  CHECK(check_s2({{0, 0, 1}, {0, 1, 0}, {1, 0, 0}}, w));
  // A later row with a strictly smaller weighted sum breaks it.
  CHECK_FALSE(check_s2({{0, 1, 0}, {1, 0, 0}, {0, 0, 1}}, w));
}

TEST_CASE("check_s3 examples") {
  CHECK(check_s3(path_graph(3), labeling({0, 1, 2})));
  // Index the path ends as 0 and 1: the node at index 1 has neighbor set {2}
  // while index 2 sees {0, 1}; dropping the mutual entries leaves {} vs {0}.
  CHECK_FALSE(check_s3(path_graph(3), labeling({0, 2, 1})));
}

TEST_CASE("labeling counts on the reference graph") {
  const UndirectedGraph g = reference_graph();
  CHECK(count_indexings(g, {}) == 720);
  CHECK(count_indexings(g, {.fixed_root = true}) == 120);
  CHECK(count_indexings(g, {.fixed_root = true, .s3 = true}) == 4);
  // The smaller-neighbor count must agree with the independent subset DP.
  CHECK(count_indexings(g, {.s1 = true}) == search_order_count(g));
  CHECK(count_indexings(g, {.s1 = true}) == 396);
}

TEST_CASE("labeling counter agrees with the subset DP on random graphs") {
  std::mt19937 rng(31);
  for (int it = 0; it < 20; ++it) {
    const int n = 3 + it % 4;
    const auto g = random_connected_graph(n, rng);
    CHECK(count_indexings(g, {.s1 = true}) == search_order_count(g));
  }
}

TEST_CASE("construction satisfies the ordering constraints exhaustively (n <= 5)") {
  for (int n = 1; n <= 5; ++n)
    for (const auto& g : connected_graph_classes(n))
      for (int root = 0; root < n; ++root) {
        const auto [idx, tr] = index_graph(g, root);
        REQUIRE(check_s3(g, idx));
        REQUIRE(check_s1(g, idx));
      }
}

TEST_CASE("construction satisfies the ordering constraints on random large graphs") {
  std::mt19937 rng(29);
  for (int it = 0; it < 200; ++it) {
    const int n = 7 + it % 2;
    const auto g = random_connected_graph(n, rng, 0.25 + 0.1 * (it % 5));
    for (int root = 0; root < n; ++root) {
      const auto [idx, tr] = index_graph(g, root);
      REQUIRE(check_s3(g, idx));
      REQUIRE(check_s1(g, idx));
    }
  }
}

TEST_CASE("every rooted graph admits at least one feasible labeling") {
  for (int n = 2; n <= 5; ++n)
    for (const auto& g : connected_graph_classes(n))
      REQUIRE(count_indexings(g, {.fixed_root = true, .s3 = true}) >= 1);
}

namespace {

void check_trace_properties(const UndirectedGraph& g, int root) {
  const auto [idx, trace] = index_graph(g, root);
  const int n = g.n;
  for (const auto& it : trace.iterations) {
    // Temporary indexes split at s between indexed and unindexed nodes.
    for (int v : it.indexed) REQUIRE(it.temp_index[v] < it.s);
    for (int v : it.unindexed) REQUIRE(it.temp_index[v] >= it.s);
  }
  // Earlier iterations hold the restriction of later indexed-neighbor sets.
  for (std::size_t i2 = 0; i2 < trace.iterations.size(); ++i2) {
    const auto& late = trace.iterations[i2];
    for (std::size_t i1 = 0; i1 <= i2; ++i1) {
      const auto& early = trace.iterations[i1];
      for (std::size_t k = 0; k < late.unindexed.size(); ++k) {
        const int v = late.unindexed[k];
        const auto pos = std::find(early.unindexed.begin(), early.unindexed.end(), v);
        REQUIRE(pos != early.unindexed.end());
        const auto& early_set = early.indexed_neighbors[pos - early.unindexed.begin()];
        REQUIRE(early_set == restrict_below(late.indexed_neighbors[k], early.s));
      }
    }
  }
  // Temporary indexes never cross the final order.
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      if (idx.index_of[u] >= idx.index_of[v]) continue;
      for (const auto& it : trace.iterations) REQUIRE(it.temp_index[u] <= it.temp_index[v]);
    }
}

}  // namespace

TEST_CASE("trace invariants hold exhaustively (n <= 5) and on random graphs") {
  for (int n = 2; n <= 5; ++n)
    for (const auto& g : connected_graph_classes(n))
      for (int root = 0; root < n; ++root) check_trace_properties(g, root);
  std::mt19937 rng(37);
  for (int it = 0; it < 30; ++it) {
    const int n = 7 + it % 2;
    check_trace_properties(random_connected_graph(n, rng), it % n);
  }
}

TEST_CASE("ordering implies smaller-neighbor connectivity on connected graphs (n <= 4)") {
  for (int n = 2; n <= 4; ++n)
    for (const auto& g : connected_graph_classes(n)) {
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      do {
        const Indexing idx{perm};
        if (check_s3(g, idx)) REQUIRE(check_s1(g, idx));
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
}
