#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "molmip/gnn.hpp"
#include "molmip/graph.hpp"
#include "test_util.hpp"

using namespace molmip;
using namespace testutil;

TEST_CASE("permute relabels edges and features") {
  auto g = path_graph(3);
  const auto id = Permutation::identity(3);
  auto same = permute(g, id);
  CHECK(same.adj == g.adj);

  auto rev = permute(g, Permutation({2, 1, 0}));
  CHECK(rev.has_edge(0, 1));
  CHECK(rev.has_edge(1, 2));
  CHECK_FALSE(rev.has_edge(0, 2));

  auto star = star_graph(4);
  auto moved = permute(star, Permutation({1, 0, 2, 3}));
  CHECK(moved.degree(1) == 3);
  CHECK(moved.degree(0) == 1);
}

TEST_CASE("permute round-trips through the inverse") {
  std::mt19937 rng(7);
  for (int it = 0; it < 50; ++it) {
    auto g = random_connected_graph(6, rng);
    auto p = random_permutation(6, rng);
    auto back = permute(permute(g, p), p.inverse());
    CHECK(back.adj == g.adj);
  }
}

TEST_CASE("permutation validation") {
  CHECK_THROWS_AS(Permutation({0, 0, 1}), std::domain_error);
  CHECK_THROWS_AS(Permutation({0, 2}), std::domain_error);
  CHECK_THROWS_AS(permute(path_graph(3), Permutation({1, 0})), std::domain_error);
}

TEST_CASE("canonical form is invariant under relabeling") {
  CHECK(canonical_form(path_graph(3)) != canonical_form(cycle_graph(3)));
  CHECK_FALSE(is_isomorphic(cycle_graph(4), path_graph(4)));
  CHECK_FALSE(is_isomorphic(path_graph(4), star_graph(4)));  // degree sequences differ

  // Exhaustive over all permutations for n <= 5.
  std::mt19937 rng(11);
  for (int n = 2; n <= 5; ++n) {
    auto g = random_connected_graph(n, rng);
    const auto base = canonical_form(g);
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    do {
      REQUIRE(canonical_form(permute(g, Permutation(p))) == base);
    } while (std::next_permutation(p.begin(), p.end()));
  }
  // Sampled for n up to the cap.
  for (int n = 6; n <= 8; ++n)
    for (int it = 0; it < 10; ++it) {
      auto g = random_connected_graph(n, rng);
      auto p = random_permutation(n, rng);
      REQUIRE(canonical_form(permute(g, p)) == canonical_form(g));
      REQUIRE(is_isomorphic(g, permute(g, p)));
    }
}

TEST_CASE("canonical form agrees with permutation-search isomorphism") {
  std::mt19937 rng(13);
  for (int it = 0; it < 60; ++it) {
    const int n = 4 + it % 3;
    auto a = random_connected_graph(n, rng);
    auto b = random_connected_graph(n, rng);
    REQUIRE(is_isomorphic(a, b) == iso_by_search(a, b));
  }
}

TEST_CASE("featured graphs differing only in labels share a form") {
  std::mt19937 rng(17);
  auto g = UndirectedGraph::make(4, 3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(1, 3);
  g.features = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}};
  auto p = random_permutation(4, rng);
  auto h = permute(g, p);
  CHECK(canonical_form(g) == canonical_form(h));
  CHECK(iso_by_search(g, h));

  // Different features on the same topology must separate.
  auto g2 = g;
  g2.features[3] = {0, 1, 1};
  CHECK(canonical_form(g) != canonical_form(g2));
}

TEST_CASE("canonicalization cap is enforced") {
  CHECK_THROWS_AS(canonical_form(path_graph(9)), UnsupportedError);
}

TEST_CASE("graph fixture round-trip and validation") {
  auto g = UndirectedGraph::make(3, 2);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.features = {{1, 0}, {0, 1}, {1, 1}};
  std::stringstream ss;
  write_graph(ss, g);
  auto back = read_graph(ss);
  CHECK(back.adj == g.adj);
  CHECK(back.features == g.features);

  std::stringstream bad("2 0\n1 1\n0 1\n");
  CHECK_THROWS_AS(read_graph(bad), ParseError);  // asymmetric
  std::stringstream bad2("2 0\n0 1\n1 1\n");
  CHECK_THROWS_AS(read_graph(bad2), ParseError);  // zero diagonal
  std::stringstream bad3("2 0\n1 2\n2 1\n");
  CHECK_THROWS_AS(read_graph(bad3), ParseError);  // non-binary entry
}

TEST_CASE("model output is invariant under relabeling") {
  std::mt19937 rng(23);
  for (int it = 0; it < 40; ++it) {
    const int n = 2 + it % 5;
    auto g = random_connected_graph(n, rng);
    g.f = 6;
    g.features.assign(n, std::vector<std::uint8_t>(6, 0));
    std::bernoulli_distribution bit(0.5);
    for (auto& row : g.features)
      for (auto& b : row) b = bit(rng);
    const auto model = random_model(6, {5}, {3, 1}, rng);
    const auto p = random_permutation(n, rng);
    REQUIRE(std::fabs(forward(model, g) - forward(model, permute(g, p))) <= 1e-9);
  }
}
