#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "molmip/camd.hpp"
#include "molmip/gnn.hpp"

namespace molmip {

/// Cumulative constraint levels: the structural system alone, plus the
/// feature-level ordering, plus the neighbor-set ordering.
enum class Level { S1 = 1, S2 = 2, S3 = 3 };

inline const char* level_name(Level l) {
  switch (l) {
    case Level::S1: return "s1";
    case Level::S2: return "s2";
    default: return "s3";
  }
}

struct EnumOptions {
  int threads = 0;            // 0 = hardware concurrency
  double budget_seconds = 0;  // 0 = unlimited
};

struct EnumerationResult {
  long long count = 0;
  bool exact = true;  // false when the time budget cut the search short
  double seconds = 0;
};

inline constexpr int kEnumerationNodeCap = 8;

namespace detail {

struct TypeOption {
  int type = 0;
  int hydrogens = 0;
  std::uint32_t row = 0;  // packed feature row, doubles as the hierarchy value
};

/// Per-space lookup tables for the search: admissible atom types per
/// (degree, double-bond count, triple-bond count) profile.
struct SpaceTables {
  int d_dim = 0, db_dim = 0, tb_dim = 0;
  int node_db_cap = 0, node_tb_cap = 0, max_cov = 0;
  std::vector<std::vector<TypeOption>> options;  // by profile key
  std::vector<int> dims, strides;                // type-count DP state layout
  int state_count = 0;

  int key(int d, int db, int tb) const { return d + d_dim * (db + db_dim * tb); }
};

inline SpaceTables build_tables(const DesignSpace& sp) {
  SpaceTables t;
  t.max_cov = sp.max_covalence();
  for (int c : sp.covalence) {
    t.node_db_cap = std::max(t.node_db_cap, c / 2);
    t.node_tb_cap = std::max(t.node_tb_cap, c / 3);
  }
  t.d_dim = sp.neighbor_slots;
  t.db_dim = t.node_db_cap + 1;
  t.tb_dim = t.node_tb_cap + 1;
  t.options.resize(static_cast<std::size_t>(t.d_dim) * t.db_dim * t.tb_dim);
  for (int d = 0; d < t.d_dim; ++d)
    for (int db = 0; db < t.db_dim; ++db)
      for (int tb = 0; tb < t.tb_dim; ++tb) {
        auto& opts = t.options[t.key(d, db, tb)];
        for (int ty = 0; ty < sp.num_types(); ++ty) {
          const int cov = sp.covalence[ty];
          if (db > cov / 2 || tb > cov / 3) continue;
          const int h = cov - d - db - 2 * tb;
          if (h < 0 || h >= sp.hydrogen_slots) continue;
          opts.push_back({ty, h, sp.feature_row(ty, d, h, db > 0, tb > 0)});
        }
      }
  t.dims.resize(sp.num_types());
  t.strides.resize(sp.num_types());
  int s = 1;
  for (int ty = 0; ty < sp.num_types(); ++ty) {
    t.dims[ty] = sp.ub_atom[ty] + 1;
    t.strides[ty] = s;
    s *= t.dims[ty];
  }
  t.state_count = s;
  if (t.state_count > 1 << 20)
    throw std::domain_error("enumeration: type-count state space too large");
  return t;
}

inline std::uint64_t c27_weight_sum(std::uint32_t row_mask, int n, int v, int skip) {
  std::uint32_t m = row_mask & ~(1u << v) & ~(1u << skip);
  std::uint64_t s = 0;
  for (std::uint32_t rest = m; rest != 0; rest &= rest - 1)
    s += 1ull << (n - 1 - std::countr_zero(rest));
  return s;
}

/// Adjacency pre-filter: forced first bond, connectivity to smaller indexes,
/// encodable degrees, ring bounds, and the neighbor-ordering dominance when
/// the level requires it.
inline bool admissible_adjacency(const DesignSpace& sp, Level level, std::uint64_t mask,
                                 const std::vector<std::pair<int, int>>& pairs,
                                 std::array<std::uint32_t, 32>& adj) {
  const int n = sp.n;
  if ((mask & 1ull) == 0) return false;  // bond 0-1
  const int edges = std::popcount(mask);
  const int rings = edges - (n - 1);
  if (rings < sp.lb_ring || rings > sp.ub_ring) return false;
  adj.fill(0);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if ((mask >> k) & 1ull) {
      adj[pairs[k].first] |= 1u << pairs[k].second;
      adj[pairs[k].second] |= 1u << pairs[k].first;
    }
  for (int v = 0; v < n; ++v) {
    if (std::popcount(adj[v]) >= sp.neighbor_slots) return false;
    if (v >= 1 && (adj[v] & ((1u << v) - 1u)) == 0) return false;
  }
  if (level == Level::S3)
    for (int v = 1; v + 1 < n; ++v)
      if (c27_weight_sum(adj[v], n, v, v + 1) < c27_weight_sum(adj[v + 1], n, v + 1, v))
        return false;
  return true;
}

/// Search state shared by the counting and streaming passes over one space.
struct SearchContext {
  const DesignSpace* sp = nullptr;
  const SpaceTables* tables = nullptr;
  Level level = Level::S1;
  int n = 0;

  std::vector<std::pair<int, int>> edges;  // current adjacency, row-major pair order
  std::array<int, 32> deg{}, dbc{}, tbc{};
  int db_total = 0, tb_total = 0;

  // Counting path.
  long long count = 0;
  std::unordered_map<std::uint64_t, long long> memo;  // profile vector -> type assignments
  std::vector<long long> dp_cur, dp_next;

  // Budget handling.
  const std::atomic<bool>* stop = nullptr;
  int tick = 0;

  bool should_stop() {
    if (stop == nullptr) return false;
    if (++tick < 1024) return false;
    tick = 0;
    return stop->load(std::memory_order_relaxed);
  }
};

/// Count type assignments for nodes [first..n) given per-node option lists,
/// a minimal admissible row for nodes >= 1, and initial type counts.
inline long long dp_type_count(SearchContext& ctx,
                               const std::array<const std::vector<TypeOption>*, 32>& opts,
                               int first, int init_state, std::uint32_t min_row) {
  const SpaceTables& t = *ctx.tables;
  const DesignSpace& sp = *ctx.sp;
  const int nt = sp.num_types();
  ctx.dp_cur.assign(t.state_count, 0);
  ctx.dp_cur[init_state] = 1;
  for (int v = first; v < ctx.n; ++v) {
    ctx.dp_next.assign(t.state_count, 0);
    for (int s = 0; s < t.state_count; ++s) {
      const long long ways = ctx.dp_cur[s];
      if (ways == 0) continue;
      for (const TypeOption& opt : *opts[v]) {
        if (v >= 1 && opt.row < min_row) continue;
        if ((s / t.strides[opt.type]) % t.dims[opt.type] == sp.ub_atom[opt.type]) continue;
        ctx.dp_next[s + t.strides[opt.type]] += ways;
      }
    }
    ctx.dp_cur.swap(ctx.dp_next);
  }
  long long total = 0;
  for (int s = 0; s < t.state_count; ++s) {
    if (ctx.dp_cur[s] == 0) continue;
    bool ok = true;
    for (int ty = 0; ty < nt && ok; ++ty)
      ok = (s / t.strides[ty]) % t.dims[ty] >= sp.lb_atom[ty];
    if (ok) total += ctx.dp_cur[s];
  }
  return total;
}

/// Number of feature assignments completing the current bond skeleton.
inline long long count_leaf(SearchContext& ctx) {
  const SpaceTables& t = *ctx.tables;
  std::array<const std::vector<TypeOption>*, 32> opts{};
  std::uint64_t memo_key = 0;
  for (int v = 0; v < ctx.n; ++v) {
    const int key = t.key(ctx.deg[v], ctx.dbc[v], ctx.tbc[v]);
    opts[v] = &t.options[key];
    if (opts[v]->empty()) return 0;
    memo_key = memo_key * t.options.size() + static_cast<std::uint64_t>(key);
  }
  if (auto it = ctx.memo.find(memo_key); it != ctx.memo.end()) return it->second;

  long long total = 0;
  if (ctx.level == Level::S1) {
    total = dp_type_count(ctx, opts, 0, 0, 0);
  } else {
    // Node 0 must carry the minimal feature row; scan its choices.
    for (const TypeOption& t0 : *opts[0]) {
      if (ctx.sp->ub_atom[t0.type] == 0) continue;
      total += dp_type_count(ctx, opts, 1, t.strides[t0.type], t0.row);
    }
  }
  ctx.memo.emplace(memo_key, total);
  return total;
}

inline bool count_bonds(SearchContext& ctx, std::size_t e) {
  if (ctx.should_stop()) return false;
  if (e == ctx.edges.size()) {
    ctx.count += count_leaf(ctx);
    return true;
  }
  const auto [u, v] = ctx.edges[e];
  const DesignSpace& sp = *ctx.sp;
  const SpaceTables& t = *ctx.tables;
  auto load = [&](int w) { return ctx.deg[w] + ctx.dbc[w] + 2 * ctx.tbc[w]; };

  if (!count_bonds(ctx, e + 1)) return false;  // single bond

  if (ctx.db_total < sp.ub_db && ctx.dbc[u] < t.node_db_cap && ctx.dbc[v] < t.node_db_cap &&
      load(u) < t.max_cov && load(v) < t.max_cov) {
    ++ctx.dbc[u], ++ctx.dbc[v], ++ctx.db_total;
    const bool go = count_bonds(ctx, e + 1);
    --ctx.dbc[u], --ctx.dbc[v], --ctx.db_total;
    if (!go) return false;
  }
  if (ctx.tb_total < sp.ub_tb && ctx.tbc[u] < t.node_tb_cap && ctx.tbc[v] < t.node_tb_cap &&
      load(u) + 2 <= t.max_cov && load(v) + 2 <= t.max_cov) {
    ++ctx.tbc[u], ++ctx.tbc[v], ++ctx.tb_total;
    const bool go = count_bonds(ctx, e + 1);
    --ctx.tbc[u], --ctx.tbc[v], --ctx.tb_total;
    if (!go) return false;
  }
  return true;
}

inline std::vector<std::pair<int, int>> pair_order(int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
  return pairs;
}

inline void setup_edges(SearchContext& ctx, const std::vector<std::pair<int, int>>& pairs,
                        std::uint64_t mask, const std::array<std::uint32_t, 32>& adj) {
  ctx.edges.clear();
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if ((mask >> k) & 1ull) ctx.edges.push_back(pairs[k]);
  for (int v = 0; v < ctx.n; ++v) {
    ctx.deg[v] = std::popcount(adj[v]);
    ctx.dbc[v] = ctx.tbc[v] = 0;
  }
  ctx.db_total = ctx.tb_total = 0;
}

}  // namespace detail

/// Exact count of feasible structures at the given constraint level. Runs the
/// adjacency scan in parallel; a non-zero time budget may return a partial
/// count labeled exact = false.
inline EnumerationResult count_feasible(const DesignSpace& sp, Level level,
                                        const EnumOptions& opts = {}) {
  sp.validate();
  if (sp.n > kEnumerationNodeCap)
    throw std::domain_error("count_feasible: node count exceeds cap " +
                            std::to_string(kEnumerationNodeCap));
  const auto t0 = std::chrono::steady_clock::now();
  const detail::SpaceTables tables = detail::build_tables(sp);
  const auto pairs = detail::pair_order(sp.n);
  const std::uint64_t total_masks = 1ull << pairs.size();

  int threads = opts.threads > 0 ? opts.threads
                                 : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<int>(std::min<std::uint64_t>(threads, total_masks));
  std::atomic<bool> stop{false};
  std::atomic<long long> grand{0};

  auto worker = [&](int id) {
    detail::SearchContext ctx;
    ctx.sp = &sp;
    ctx.tables = &tables;
    ctx.level = level;
    ctx.n = sp.n;
    ctx.stop = &stop;
    std::array<std::uint32_t, 32> adj{};
    const auto deadline =
        opts.budget_seconds > 0
            ? t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(opts.budget_seconds))
            : std::chrono::steady_clock::time_point::max();
    std::uint64_t checked = 0;
    for (std::uint64_t mask = id; mask < total_masks; mask += threads) {
      if ((++checked & 0xfff) == 0 && std::chrono::steady_clock::now() > deadline)
        stop.store(true, std::memory_order_relaxed);
      if (stop.load(std::memory_order_relaxed)) break;
      if (!detail::admissible_adjacency(sp, level, mask, pairs, adj)) continue;
      detail::setup_edges(ctx, pairs, mask, adj);
      if (!detail::count_bonds(ctx, 0)) break;
    }
    grand.fetch_add(ctx.count, std::memory_order_relaxed);
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker, i);
    for (auto& th : pool) th.join();
  }

  EnumerationResult res;
  res.count = grand.load();
  res.exact = !stop.load();
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

namespace detail {

struct StreamContext {
  SearchContext base;
  const std::function<bool(const Molecule&)>* fn = nullptr;
  std::array<std::uint32_t, 32> adj{};
  std::array<int, 32> chosen_type{}, chosen_h{};
  std::array<std::uint32_t, 32> db_mask{}, tb_mask{};
  std::array<int, 8> type_counts{};
  std::uint32_t row0 = 0;
  bool aborted = false;
};

inline bool emit_molecule(StreamContext& sc) {
  const DesignSpace& sp = *sc.base.sp;
  Molecule mol = Molecule::make(sp.n, sp.feature_count());
  for (int v = 0; v < sp.n; ++v) {
    mol.a[v] = sc.adj[v] | (1u << v);
    mol.db[v] = sc.db_mask[v];
    mol.tb[v] = sc.tb_mask[v];
    mol.x[v] = sp.feature_row(sc.chosen_type[v], sc.base.deg[v], sc.chosen_h[v],
                              sc.base.dbc[v] > 0, sc.base.tbc[v] > 0);
  }
  return (*sc.fn)(mol);
}

inline bool stream_types(StreamContext& sc, int v) {
  SearchContext& ctx = sc.base;
  const DesignSpace& sp = *ctx.sp;
  if (v == ctx.n) return emit_molecule(sc);
  const auto& opts = ctx.tables->options[ctx.tables->key(ctx.deg[v], ctx.dbc[v], ctx.tbc[v])];
  const int remaining = ctx.n - v - 1;
  for (const TypeOption& opt : opts) {
    if (ctx.level != Level::S1 && v >= 1 && opt.row < sc.row0) continue;
    if (sc.type_counts[opt.type] == sp.ub_atom[opt.type]) continue;
    ++sc.type_counts[opt.type];
    // Remaining nodes must still be able to reach every lower bound.
    int deficit = 0;
    for (int ty = 0; ty < sp.num_types(); ++ty)
      deficit += std::max(0, sp.lb_atom[ty] - sc.type_counts[ty]);
    if (deficit <= remaining) {
      sc.chosen_type[v] = opt.type;
      sc.chosen_h[v] = opt.hydrogens;
      if (v == 0) sc.row0 = opt.row;
      if (!stream_types(sc, v + 1)) {
        --sc.type_counts[opt.type];
        return false;
      }
    }
    --sc.type_counts[opt.type];
  }
  return true;
}

inline bool stream_bonds(StreamContext& sc, std::size_t e) {
  SearchContext& ctx = sc.base;
  if (e == ctx.edges.size()) {
    std::fill(sc.type_counts.begin(), sc.type_counts.end(), 0);
    return stream_types(sc, 0);
  }
  const auto [u, v] = ctx.edges[e];
  const DesignSpace& sp = *ctx.sp;
  const SpaceTables& t = *ctx.tables;
  auto load = [&](int w) { return ctx.deg[w] + ctx.dbc[w] + 2 * ctx.tbc[w]; };

  if (!stream_bonds(sc, e + 1)) return false;

  if (ctx.db_total < sp.ub_db && ctx.dbc[u] < t.node_db_cap && ctx.dbc[v] < t.node_db_cap &&
      load(u) < t.max_cov && load(v) < t.max_cov) {
    ++ctx.dbc[u], ++ctx.dbc[v], ++ctx.db_total;
    sc.db_mask[u] |= 1u << v;
    sc.db_mask[v] |= 1u << u;
    const bool go = stream_bonds(sc, e + 1);
    sc.db_mask[u] &= ~(1u << v);
    sc.db_mask[v] &= ~(1u << u);
    --ctx.dbc[u], --ctx.dbc[v], --ctx.db_total;
    if (!go) return false;
  }
  if (ctx.tb_total < sp.ub_tb && ctx.tbc[u] < t.node_tb_cap && ctx.tbc[v] < t.node_tb_cap &&
      load(u) + 2 <= t.max_cov && load(v) + 2 <= t.max_cov) {
    ++ctx.tbc[u], ++ctx.tbc[v], ++ctx.tb_total;
    sc.tb_mask[u] |= 1u << v;
    sc.tb_mask[v] |= 1u << u;
    const bool go = stream_bonds(sc, e + 1);
    sc.tb_mask[u] &= ~(1u << v);
    sc.tb_mask[v] &= ~(1u << u);
    --ctx.tbc[u], --ctx.tbc[v], --ctx.tb_total;
    if (!go) return false;
  }
  return true;
}

}  // namespace detail

/// Visit every feasible structure in canonical enumeration order: adjacency
/// masks ascending (row-major pair bits), bond types single/double/triple per
/// edge, then atom types in ascending type index per node. The callback
/// returns false to stop early.
inline void for_each_feasible(const DesignSpace& sp, Level level,
                              const std::function<bool(const Molecule&)>& fn) {
  sp.validate();
  if (sp.n > kEnumerationNodeCap)
    throw std::domain_error("for_each_feasible: node count exceeds cap " +
                            std::to_string(kEnumerationNodeCap));
  const detail::SpaceTables tables = detail::build_tables(sp);
  const auto pairs = detail::pair_order(sp.n);
  detail::StreamContext sc;
  sc.base.sp = &sp;
  sc.base.tables = &tables;
  sc.base.level = level;
  sc.base.n = sp.n;
  sc.fn = &fn;
  for (std::uint64_t mask = 0; mask < (1ull << pairs.size()); ++mask) {
    if (!detail::admissible_adjacency(sp, level, mask, pairs, sc.adj)) continue;
    detail::setup_edges(sc.base, pairs, mask, sc.adj);
    sc.db_mask.fill(0);
    sc.tb_mask.fill(0);
    if (!detail::stream_bonds(sc, 0)) return;
  }
}

/// Canonical byte string of a molecular graph: the minimum over all node
/// relabelings of the (features, A, DB, TB) encoding.
inline std::string molecule_canonical_form(const Molecule& mol, int cap = kCanonicalCap) {
  if (mol.n > cap)
    throw UnsupportedError("molecule_canonical_form: node count exceeds cap " +
                           std::to_string(cap));
  std::vector<int> p(mol.n);
  std::iota(p.begin(), p.end(), 0);
  std::string best;
  auto encode = [&]() {
    std::string out;
    out.reserve(static_cast<std::size_t>(mol.n) * 4 + 3 * mol.n * mol.n / 8 + 4);
    for (int v = 0; v < mol.n; ++v) {
      const std::uint32_t row = mol.x[p[v]];
      out.push_back(static_cast<char>((row >> 24) & 0xff));
      out.push_back(static_cast<char>((row >> 16) & 0xff));
      out.push_back(static_cast<char>((row >> 8) & 0xff));
      out.push_back(static_cast<char>(row & 0xff));
    }
    for (const auto* m : {&mol.a, &mol.db, &mol.tb}) {
      std::uint32_t bits = 0;
      int nbits = 0;
      for (int v = 0; v < mol.n; ++v)
        for (int u = 0; u < v; ++u) {
          bits = (bits << 1) | (((*m)[p[u]] >> p[v]) & 1u);
          if (++nbits == 8) {
            out.push_back(static_cast<char>(bits));
            bits = 0;
            nbits = 0;
          }
        }
      if (nbits > 0) out.push_back(static_cast<char>(bits << (8 - nbits)));
    }
    return out;
  };
  best = encode();
  while (std::next_permutation(p.begin(), p.end())) {
    std::string cand = encode();
    if (cand < best) best = std::move(cand);
  }
  return best;
}

/// Canonical forms of every feasible structure at the level.
inline std::unordered_set<std::string> feasible_class_forms(const DesignSpace& sp, Level level) {
  std::unordered_set<std::string> forms;
  for_each_feasible(sp, level, [&](const Molecule& mol) {
    forms.insert(molecule_canonical_form(mol));
    return true;
  });
  return forms;
}

/// Number of isomorphism classes among the structurally feasible solutions.
inline long long count_classes(const DesignSpace& sp, Level level = Level::S1) {
  return static_cast<long long>(feasible_class_forms(sp, level).size());
}

struct BruteOptResult {
  Molecule molecule;
  double value = 0;
};

/// Enumerate the feasible set and return the structure minimizing the model
/// output; ties keep the first structure in enumeration order.
inline BruteOptResult brute_optimize(const DesignSpace& sp, const GnnModel& model, Level level) {
  model.validate();
  if (model.input_width() != sp.feature_count())
    throw std::domain_error("brute_optimize: model input width != feature count");
  bool found = false;
  BruteOptResult best;
  for_each_feasible(sp, level, [&](const Molecule& mol) {
    const double value = forward(model, mol);
    if (!found || value < best.value) {
      found = true;
      best.molecule = mol;
      best.value = value;
    }
    return true;
  });
  if (!found) throw std::domain_error("brute_optimize: empty feasible set");
  return best;
}

}  // namespace molmip
