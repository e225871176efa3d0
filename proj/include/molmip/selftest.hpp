#pragma once

#include <string>

#include "molmip/enumerate.hpp"
#include "molmip/indexing.hpp"

namespace molmip {

/// The six-node reference graph used by the indexing golden cases.
inline UndirectedGraph reference_graph() {
  UndirectedGraph g = UndirectedGraph::make(6);
  const int edges[][2] = {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5},
                          {1, 2}, {1, 3}, {1, 4}, {2, 5}, {3, 4}};
  for (const auto& e : edges) g.add_edge(e[0], e[1]);
  return g;
}

/// Deterministic golden suite: labeling counts on the reference graph, the
/// golden indexing, and the feasible-structure counts for both built-in
/// design spaces at N = 2..5. The report is byte-stable across runs; the last
/// line is "selftest=pass" or "selftest=fail".
inline std::string run_selftest(int threads = 0) {
  std::string out = "molmip selftest\n";
  bool ok = true;
  auto check = [&](const std::string& name, long long expected, long long got) {
    out += name + " expected=" + std::to_string(expected) + " got=" + std::to_string(got) +
           (expected == got ? " ok" : " MISMATCH") + "\n";
    ok &= expected == got;
  };

  const UndirectedGraph g = reference_graph();
  check("ref-graph labelings none", 720, count_indexings(g, {}));
  check("ref-graph labelings s1", 396, count_indexings(g, {.s1 = true}));
  check("ref-graph labelings root", 120, count_indexings(g, {.fixed_root = true}));
  check("ref-graph labelings root+s3", 4, count_indexings(g, {.fixed_root = true, .s3 = true}));

  {
    const auto [idx, trace] = index_graph(g, 0);
    const std::vector<int> golden = {0, 1, 4, 2, 3, 5};
    std::string got, want;
    for (int v = 0; v < g.n; ++v) {
      got += (v ? "," : "") + std::to_string(idx.index_of[v]);
      want += (v ? "," : "") + std::to_string(golden[v]);
    }
    const bool match = idx.index_of == golden && check_s3(g, idx) && check_s1(g, idx);
    out += "ref-graph golden indexing expected=" + want + " got=" + got +
           (match ? " ok" : " MISMATCH") + "\n";
    ok &= match;
  }

  struct Row {
    const char* dataset;
    int n;
    long long counts[3];  // s1, s1+s2, s1+s2+s3
  };
  const Row rows[] = {
      {"qm7", 2, {17, 10, 10}},        {"qm7", 3, {112, 37, 37}},
      {"qm7", 4, {3323, 726, 416}},    {"qm7", 5, {67020, 11747, 3003}},
      {"qm9", 2, {15, 9, 9}},          {"qm9", 3, {175, 54, 54}},
      {"qm9", 4, {4536, 1077, 631}},   {"qm9", 5, {117188, 21441, 5860}},
  };
  EnumOptions opts;
  opts.threads = threads;
  for (const Row& r : rows) {
    const DesignSpace sp = std::string(r.dataset) == "qm7" ? qm7_space(r.n) : qm9_space(r.n);
    const Level levels[3] = {Level::S1, Level::S2, Level::S3};
    for (int i = 0; i < 3; ++i) {
      const auto res = count_feasible(sp, levels[i], opts);
      check("count " + std::string(r.dataset) + " n=" + std::to_string(r.n) + " " +
                level_name(levels[i]),
            r.counts[i], res.exact ? res.count : -1);
    }
  }

  out += ok ? "selftest=pass\n" : "selftest=fail\n";
  return out;
}

}  // namespace molmip
