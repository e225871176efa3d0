#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace molmip {

/// A multiset of integers, stored in any order. Admissible for parameters
/// (M, L) when it has at most L elements, all in [0, M-1].
using Multiset = std::vector<int>;

/// Non-decreasing sequence of fixed length over [0, M]: the image of an
/// admissible multiset after sorting and padding with M.
struct PaddedSequence {
  std::vector<int> values;
  int pad_value = 0;

  friend bool operator==(const PaddedSequence&, const PaddedSequence&) = default;
};

namespace detail {

inline void require_admissible(const Multiset& ms, int m, int l, const char* who) {
  if (m < 1) throw std::domain_error(std::string(who) + ": M must be >= 1");
  if (l < 0) throw std::domain_error(std::string(who) + ": L must be >= 0");
  if (static_cast<int>(ms.size()) > l)
    throw std::domain_error(std::string(who) + ": multiset has " + std::to_string(ms.size()) +
                            " elements, limit is " + std::to_string(l));
  for (int e : ms)
    if (e < 0 || e >= m)
      throw std::domain_error(std::string(who) + ": element " + std::to_string(e) +
                              " outside [0, " + std::to_string(m - 1) + "]");
}

/// Compare two sorted multisets by the order of their padded sequences without
/// materializing the pads. The shorter multiset continues with the pad value,
/// which is strictly larger than any real element, so at the first length
/// mismatch the longer multiset is the smaller sequence. Bit-equivalent to
/// pad-then-compare.
inline std::strong_ordering compare_sorted(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t k = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < k; ++i)
    if (a[i] != b[i]) return a[i] <=> b[i];
  if (a.size() == b.size()) return std::strong_ordering::equal;
  return a.size() > b.size() ? std::strong_ordering::less : std::strong_ordering::greater;
}

}  // namespace detail

/// Sort ascending, then append the pad value M until the length equals L.
inline PaddedSequence pad(const Multiset& ms, int m, int l) {
  detail::require_admissible(ms, m, l, "pad");
  PaddedSequence seq;
  seq.pad_value = m;
  seq.values = ms;
  std::sort(seq.values.begin(), seq.values.end());
  seq.values.resize(static_cast<std::size_t>(l), m);
  return seq;
}

/// Order of two admissible multisets: the elementwise comparison of their
/// padded sequences at the first differing position.
inline std::strong_ordering lex_compare(const Multiset& a, const Multiset& b, int m, int l) {
  detail::require_admissible(a, m, l, "lex_compare");
  detail::require_admissible(b, m, l, "lex_compare");
  Multiset sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return detail::compare_sorted(sa, sb);
}

/// Sub-multiset of elements strictly below m.
inline Multiset restrict_below(const Multiset& ms, int m) {
  if (m < 1) throw std::domain_error("restrict_below: m must be >= 1");
  Multiset out;
  out.reserve(ms.size());
  for (int e : ms)
    if (e < m) out.push_back(e);
  return out;
}

}  // namespace molmip
