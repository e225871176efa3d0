#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>
#include <set>

#include "molmip/lexorder.hpp"

using namespace molmip;

namespace {

// All multisets with up to l elements in [0, m-1], smallest-first recursion.
std::vector<Multiset> all_multisets(int m, int l) {
  std::vector<Multiset> out = {{}};
  for (std::size_t i = 0; i < out.size(); ++i) {
    Multiset base = out[i];
    if (static_cast<int>(base.size()) == l) continue;
    const int lo = base.empty() ? 0 : base.back();
    for (int e = lo; e < m; ++e) {
      Multiset next = base;
      next.push_back(e);
      out.push_back(std::move(next));
    }
  }
  return out;
}

std::strong_ordering compare_by_padding(const Multiset& a, const Multiset& b, int m, int l) {
  const auto pa = pad(a, m, l).values;
  const auto pb = pad(b, m, l).values;
  for (int i = 0; i < l; ++i)
    if (pa[i] != pb[i]) return pa[i] <=> pb[i];
  return std::strong_ordering::equal;
}

}  // namespace

TEST_CASE("pad sorts and fills with the pad value") {
  CHECK(pad({0, 1}, 6, 5).values == std::vector<int>{0, 1, 6, 6, 6});
  CHECK(pad({}, 6, 5).values == std::vector<int>{6, 6, 6, 6, 6});
  CHECK(pad({0, 1, 1, 1}, 6, 5).values == std::vector<int>{0, 1, 1, 1, 6});
  CHECK(pad({3, 0, 2}, 4, 4).values == std::vector<int>{0, 2, 3, 4});
}

TEST_CASE("pad rejects inadmissible multisets") {
  CHECK_THROWS_AS(pad({0, 1, 2}, 6, 2), std::domain_error);
  CHECK_THROWS_AS(pad({6}, 6, 3), std::domain_error);
  CHECK_THROWS_AS(pad({-1}, 6, 3), std::domain_error);
  CHECK_THROWS_AS(lex_compare({0}, {7}, 6, 3), std::domain_error);
}

TEST_CASE("lex_compare orders padded sequences") {
  CHECK(lex_compare({0, 1}, {0, 2}, 6, 5) == std::strong_ordering::less);
  // A superset sharing the prefix compares smaller: the extra real element
  // beats the pad value.
  CHECK(lex_compare({0, 1, 1, 1}, {0, 1, 1}, 6, 5) == std::strong_ordering::less);
  CHECK(lex_compare({0, 2}, {0, 4}, 6, 5) == std::strong_ordering::less);
  CHECK(lex_compare({0, 2}, {0, 2}, 6, 5) == std::strong_ordering::equal);
  CHECK(lex_compare({2, 0}, {0, 2}, 6, 5) == std::strong_ordering::equal);
  CHECK(lex_compare({1}, {0, 1}, 6, 5) == std::strong_ordering::greater);
}

TEST_CASE("restrict_below keeps elements under the cut") {
  CHECK(restrict_below({0, 2, 5}, 3) == Multiset{0, 2});
  CHECK(restrict_below({4, 5}, 3).empty());
  CHECK(restrict_below({0, 1, 2}, 6) == Multiset{0, 1, 2});
  CHECK_THROWS_AS(restrict_below({0}, 0), std::domain_error);
}

TEST_CASE("lex_compare equals pad-then-compare exhaustively") {
  for (int m = 1; m <= 4; ++m)
    for (int l = 1; l <= 3; ++l) {
      const auto sets = all_multisets(m, l);
      for (const auto& a : sets)
        for (const auto& b : sets)
          REQUIRE(lex_compare(a, b, m, l) == compare_by_padding(a, b, m, l));
    }
}

TEST_CASE("pad is injective over admissible multisets") {
  for (int m = 1; m <= 5; ++m)
    for (int l = 1; l <= 4; ++l) {
      const auto sets = all_multisets(m, l);
      std::set<std::vector<int>> images;
      for (const auto& s : sets) images.insert(pad(s, m, l).values);
      REQUIRE(images.size() == sets.size());
    }
}

TEST_CASE("restriction preserves the order (monotone restriction)") {
  // Exhaustive for small parameters.
  for (int m = 2; m <= 5; ++m)
    for (int l = 1; l <= 4; ++l) {
      const auto sets = all_multisets(m, l);
      for (const auto& a : sets)
        for (const auto& b : sets) {
          if (lex_compare(a, b, m, l) == std::strong_ordering::greater) continue;
          for (int cut = 1; cut <= m; ++cut)
            REQUIRE(lex_compare(restrict_below(a, cut), restrict_below(b, cut), m, l) !=
                    std::strong_ordering::greater);
        }
    }
  // Randomized beyond.
  std::mt19937 rng(20240511);
  std::uniform_int_distribution<int> msize(0, 7);
  for (int it = 0; it < 2000; ++it) {
    const int m = 6 + it % 5, l = 7;
    std::uniform_int_distribution<int> elem(0, m - 1);
    Multiset a(msize(rng)), b(msize(rng));
    for (int& e : a) e = elem(rng);
    for (int& e : b) e = elem(rng);
    if (lex_compare(a, b, m, l) == std::strong_ordering::greater) std::swap(a, b);
    for (int cut = 1; cut <= m; ++cut)
      REQUIRE(lex_compare(restrict_below(a, cut), restrict_below(b, cut), m, l) !=
              std::strong_ordering::greater);
  }
}

TEST_CASE("the order is total and antisymmetric on distinct multisets") {
  const auto sets = all_multisets(4, 3);
  for (const auto& a : sets)
    for (const auto& b : sets) {
      const auto ab = lex_compare(a, b, 4, 3);
      const auto ba = lex_compare(b, a, 4, 3);
      if (ab == std::strong_ordering::equal) {
        REQUIRE(ba == std::strong_ordering::equal);
        REQUIRE(pad(a, 4, 3) == pad(b, 4, 3));
      } else {
        REQUIRE(ba != ab);
      }
    }
}
