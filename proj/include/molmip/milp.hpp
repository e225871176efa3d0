#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "molmip/camd.hpp"
#include "molmip/enumerate.hpp"
#include "molmip/errors.hpp"
#include "molmip/gnn.hpp"

namespace molmip {

enum class VarKind { Binary, Continuous };
enum class Sense { Le, Eq, Ge };
enum class MilpVariant { Bilinear, BigM };

struct MilpVariable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lo = 0, hi = 0;
};

struct LinTerm {
  int var = 0;
  double coef = 0;
};

/// Product of two distinct variables with a coefficient.
struct QuadTerm {
  int a = 0, b = 0;
  double coef = 0;
};

struct MilpConstraint {
  std::string name;
  std::string family;
  Sense sense = Sense::Le;
  double rhs = 0;
  std::vector<LinTerm> lin;
  std::vector<QuadTerm> quad;
};

/// Mixed-integer model with an optional bilinear part. Variables and
/// constraints keep their declaration order; names are unique.
struct MilpModel {
  MilpVariant variant = MilpVariant::BigM;
  bool symmetry = true;
  int n = 0, f = 0;
  std::vector<MilpVariable> variables;
  std::vector<MilpConstraint> constraints;
  std::vector<LinTerm> objective;  // minimized
  std::unordered_map<std::string, int> index;

  int add_variable(std::string name, VarKind kind, double lo, double hi) {
    if (!index.emplace(name, static_cast<int>(variables.size())).second)
      throw std::domain_error("MilpModel: duplicate variable " + name);
    variables.push_back({std::move(name), kind, lo, hi});
    return static_cast<int>(variables.size()) - 1;
  }

  int var(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw std::domain_error("MilpModel: unknown variable " + name);
    return it->second;
  }

  MilpConstraint& add_constraint(std::string name, std::string family, Sense sense, double rhs) {
    constraints.push_back({std::move(name), std::move(family), sense, rhs, {}, {}});
    return constraints.back();
  }

  bool has_quadratic() const {
    for (const auto& c : constraints)
      if (!c.quad.empty()) return true;
    return false;
  }
};

namespace detail {

inline std::string fmt_num(double v) {
  if (v == 0) v = 0;  // normalize -0
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

// Variable naming scheme shared by the builder and the embedder.
inline std::string var_x(int v, int fi) { return "X_" + std::to_string(v) + "_" + std::to_string(fi); }
inline std::string var_a(int u, int v) {
  if (u > v) std::swap(u, v);
  return "A_" + std::to_string(u) + "_" + std::to_string(v);
}
inline std::string var_db(int u, int v) {
  if (u > v) std::swap(u, v);
  return "DB_" + std::to_string(u) + "_" + std::to_string(v);
}
inline std::string var_tb(int u, int v) {
  if (u > v) std::swap(u, v);
  return "TB_" + std::to_string(u) + "_" + std::to_string(v);
}
inline std::string var_z(int layer, int u, int v, int c) {
  return "z_g" + std::to_string(layer) + "_" + std::to_string(u) + "_" + std::to_string(v) + "_" +
         std::to_string(c);
}
inline std::string var_gpre(int layer, int v, int c) {
  return "gpre_g" + std::to_string(layer) + "_" + std::to_string(v) + "_" + std::to_string(c);
}
inline std::string var_gx(int layer, int v, int c) {
  return "gx_g" + std::to_string(layer) + "_" + std::to_string(v) + "_" + std::to_string(c);
}
inline std::string var_grelu(int layer, int v, int c) {
  return "grelu_g" + std::to_string(layer) + "_" + std::to_string(v) + "_" + std::to_string(c);
}
inline std::string var_pool(int c) { return "pool_" + std::to_string(c); }
inline std::string var_dpre(int layer, int c) {
  return "dpre_d" + std::to_string(layer) + "_" + std::to_string(c);
}
inline std::string var_dx(int layer, int c) {
  return "dx_d" + std::to_string(layer) + "_" + std::to_string(c);
}
inline std::string var_drelu(int layer, int c) {
  return "drelu_d" + std::to_string(layer) + "_" + std::to_string(c);
}

inline double big_m_of(const Interval& iv) { return std::max(std::fabs(iv.lo), std::fabs(iv.hi)); }

/// ReLU output var y = max(0, pre) with indicator delta and pre in [lo, hi]:
///   y >= pre;  y <= pre - lo (1 - delta);  y <= hi delta;  y >= 0 (bound).
inline void add_relu_rows(MilpModel& m, const std::string& tag, int y, int pre, int delta,
                          double lo, double hi) {
  {
    auto& c = m.add_constraint(tag + "_ge", "relu", Sense::Ge, 0);
    c.lin = {{y, 1.0}, {pre, -1.0}};
  }
  {
    auto& c = m.add_constraint(tag + "_ub", "relu", Sense::Le, -lo);
    c.lin = {{y, 1.0}, {pre, -1.0}, {delta, -lo}};
  }
  {
    auto& c = m.add_constraint(tag + "_on", "relu", Sense::Le, 0);
    c.lin = {{y, 1.0}, {delta, -hi}};
  }
}

}  // namespace detail

/// Assemble the full model: structural constraints, optional symmetry rows,
/// and the network encoding in the requested variant, minimizing the output.
inline MilpModel build_milp(const DesignSpace& sp, const GnnModel& gnn, MilpVariant variant,
                            bool symmetry) {
  sp.validate();
  gnn.validate();
  if (gnn.input_width() != sp.feature_count())
    throw std::domain_error("build_milp: model input width != design-space feature count");
  const BoundsTensor bt = propagate_bounds(gnn, sp);
  const int n = sp.n;
  const int F = sp.feature_count();
  const int nt = sp.num_types();
  using detail::var_a;
  using detail::var_db;
  using detail::var_tb;
  using detail::var_x;

  MilpModel m;
  m.variant = variant;
  m.symmetry = symmetry;
  m.n = n;
  m.f = F;

  auto check_finite = [&](const Interval& iv, const char* where) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
      throw std::domain_error(std::string("build_milp: unbounded unit in ") + where +
                              "; tighter activation bounds required");
  };

  // --- variables ---------------------------------------------------------
  for (int v = 0; v < n; ++v)
    for (int fi = 0; fi < F; ++fi) m.add_variable(var_x(v, fi), VarKind::Binary, 0, 1);
  for (int u = 0; u < n; ++u)
    for (int v = u; v < n; ++v)
      m.add_variable(var_a(u, v), VarKind::Binary, u == v ? 1 : 0, 1);  // diagonal fixed: exact-N
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) m.add_variable(var_db(u, v), VarKind::Binary, 0, 1);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) m.add_variable(var_tb(u, v), VarKind::Binary, 0, 1);

  const int n_glayers = static_cast<int>(gnn.graph_layers.size());
  for (int i = 0; i < n_glayers; ++i) {
    const GraphLayer& gl = gnn.graph_layers[i];
    const int layer = i + 1;
    const auto& in_bounds = bt.layer_input(i);
    if (variant == MilpVariant::BigM) {
      const int din = gl.w_self.cols;
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          if (u == v) continue;
          for (int c = 0; c < din; ++c) {
            check_finite(in_bounds[u][c], "edge contribution");
            m.add_variable(detail::var_z(layer, u, v, c), VarKind::Continuous,
                           std::min(0.0, in_bounds[u][c].lo), std::max(0.0, in_bounds[u][c].hi));
          }
        }
    }
    const int dout = gl.w_self.rows;
    for (int v = 0; v < n; ++v)
      for (int c = 0; c < dout; ++c) {
        check_finite(bt.graph_pre[i][v][c], "graph layer");
        m.add_variable(detail::var_gpre(layer, v, c), VarKind::Continuous, bt.graph_pre[i][v][c].lo,
                       bt.graph_pre[i][v][c].hi);
      }
    for (int v = 0; v < n; ++v)
      for (int c = 0; c < dout; ++c)
        m.add_variable(detail::var_gx(layer, v, c), VarKind::Continuous, bt.graph_post[i][v][c].lo,
                       bt.graph_post[i][v][c].hi);
    if (gl.act == Activation::Relu)
      for (int v = 0; v < n; ++v)
        for (int c = 0; c < dout; ++c)
          m.add_variable(detail::var_grelu(layer, v, c), VarKind::Binary, 0, 1);
  }
  for (int c = 0; c < gnn.pooled_width(); ++c) {
    check_finite(bt.pooled[c], "pooling");
    m.add_variable(detail::var_pool(c), VarKind::Continuous, bt.pooled[c].lo, bt.pooled[c].hi);
  }
  for (std::size_t k = 0; k < gnn.dense_layers.size(); ++k) {
    const DenseLayer& dl = gnn.dense_layers[k];
    const int layer = static_cast<int>(k) + 1;
    for (int c = 0; c < dl.w.rows; ++c) {
      check_finite(bt.dense_pre[k][c], "dense layer");
      m.add_variable(detail::var_dpre(layer, c), VarKind::Continuous, bt.dense_pre[k][c].lo,
                     bt.dense_pre[k][c].hi);
    }
    for (int c = 0; c < dl.w.rows; ++c)
      m.add_variable(detail::var_dx(layer, c), VarKind::Continuous, bt.dense_post[k][c].lo,
                     bt.dense_post[k][c].hi);
    if (dl.act == Activation::Relu)
      for (int c = 0; c < dl.w.rows; ++c)
        m.add_variable(detail::var_drelu(layer, c), VarKind::Binary, 0, 1);
  }

  // --- structural constraints -------------------------------------------
  {
    auto& c = m.add_constraint("C1_exist0", "C1", Sense::Eq, 1);
    c.lin = {{m.var(var_a(0, 0)), 1.0}};
  }
  {
    auto& c = m.add_constraint("C1_exist1", "C1", Sense::Eq, 1);
    c.lin = {{m.var(var_a(1, 1)), 1.0}};
  }
  {
    auto& c = m.add_constraint("C1_bond01", "C1", Sense::Eq, 1);
    c.lin = {{m.var(var_a(0, 1)), 1.0}};
  }
  for (int v = 0; v + 1 < n; ++v) {
    auto& c = m.add_constraint("C2_" + std::to_string(v), "C2", Sense::Ge, 0);
    c.lin = {{m.var(var_a(v, v)), 1.0}, {m.var(var_a(v + 1, v + 1)), -1.0}};
  }
  for (int v = 0; v < n; ++v) {
    auto& c = m.add_constraint("C4_" + std::to_string(v), "C4", Sense::Ge, 0);
    c.lin.push_back({m.var(var_a(v, v)), double(n - 1)});
    for (int u = 0; u < n; ++u)
      if (u != v) c.lin.push_back({m.var(var_a(u, v)), -1.0});
  }
  for (int v = 1; v < n; ++v) {
    auto& c = m.add_constraint("C5_" + std::to_string(v), "C5", Sense::Ge, 0);
    for (int u = 0; u < v; ++u) c.lin.push_back({m.var(var_a(u, v)), 1.0});
    c.lin.push_back({m.var(var_a(v, v)), -1.0});
  }
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      auto& c = m.add_constraint("C10_" + std::to_string(u) + "_" + std::to_string(v), "C10",
                                 Sense::Le, 0);
      c.lin = {{m.var(var_db(u, v)), 1.0}, {m.var(var_tb(u, v)), 1.0}, {m.var(var_a(u, v)), -1.0}};
    }
  auto one_hot_block = [&](const char* id, int off, int width) {
    for (int v = 0; v < n; ++v) {
      auto& c = m.add_constraint(std::string(id) + "_" + std::to_string(v), id, Sense::Eq, 0);
      for (int i = 0; i < width; ++i) c.lin.push_back({m.var(var_x(v, off + i)), 1.0});
      c.lin.push_back({m.var(var_a(v, v)), -1.0});
    }
  };
  one_hot_block("C11", sp.type_index(0), nt);
  one_hot_block("C12", sp.ncount_index(0), sp.neighbor_slots);
  one_hot_block("C13", sp.hcount_index(0), sp.hydrogen_slots);
  for (int v = 0; v < n; ++v) {
    auto& c = m.add_constraint("C14_" + std::to_string(v), "C14", Sense::Eq, 0);
    for (int u = 0; u < n; ++u)
      if (u != v) c.lin.push_back({m.var(var_a(u, v)), 1.0});
    for (int i = 1; i < sp.neighbor_slots; ++i)
      c.lin.push_back({m.var(var_x(v, sp.ncount_index(i))), -double(i)});
  }
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      auto& c15 = m.add_constraint("C15_" + std::to_string(u) + "_" + std::to_string(v), "C15",
                                   Sense::Le, 0);
      c15.lin = {{m.var(var_db(u, v)), 3.0},
                 {m.var(var_x(u, sp.db_flag_index())), -1.0},
                 {m.var(var_x(v, sp.db_flag_index())), -1.0},
                 {m.var(var_a(u, v)), -1.0}};
      auto& c16 = m.add_constraint("C16_" + std::to_string(u) + "_" + std::to_string(v), "C16",
                                   Sense::Le, 0);
      c16.lin = {{m.var(var_tb(u, v)), 3.0},
                 {m.var(var_x(u, sp.tb_flag_index())), -1.0},
                 {m.var(var_x(v, sp.tb_flag_index())), -1.0},
                 {m.var(var_a(u, v)), -1.0}};
    }
  for (int v = 0; v < n; ++v) {
    auto& c17 = m.add_constraint("C17_" + std::to_string(v), "C17", Sense::Le, 0);
    for (int u = 0; u < n; ++u)
      if (u != v) c17.lin.push_back({m.var(var_db(u, v)), 1.0});
    for (int t = 0; t < nt; ++t)
      c17.lin.push_back({m.var(var_x(v, sp.type_index(t))), -double(sp.covalence[t] / 2)});
    auto& c18 = m.add_constraint("C18_" + std::to_string(v), "C18", Sense::Le, 0);
    for (int u = 0; u < n; ++u)
      if (u != v) c18.lin.push_back({m.var(var_tb(u, v)), 1.0});
    for (int t = 0; t < nt; ++t)
      c18.lin.push_back({m.var(var_x(v, sp.type_index(t))), -double(sp.covalence[t] / 3)});
    auto& c19 = m.add_constraint("C19_" + std::to_string(v), "C19", Sense::Le, 0);
    c19.lin.push_back({m.var(var_x(v, sp.db_flag_index())), 1.0});
    for (int u = 0; u < n; ++u)
      if (u != v) c19.lin.push_back({m.var(var_db(u, v)), -1.0});
    auto& c20 = m.add_constraint("C20_" + std::to_string(v), "C20", Sense::Le, 0);
    c20.lin.push_back({m.var(var_x(v, sp.tb_flag_index())), 1.0});
    for (int u = 0; u < n; ++u)
      if (u != v) c20.lin.push_back({m.var(var_tb(u, v)), -1.0});
    auto& c21 = m.add_constraint("C21_" + std::to_string(v), "C21", Sense::Eq, 0);
    for (int t = 0; t < nt; ++t)
      c21.lin.push_back({m.var(var_x(v, sp.type_index(t))), double(sp.covalence[t])});
    for (int i = 1; i < sp.neighbor_slots; ++i)
      c21.lin.push_back({m.var(var_x(v, sp.ncount_index(i))), -double(i)});
    for (int i = 1; i < sp.hydrogen_slots; ++i)
      c21.lin.push_back({m.var(var_x(v, sp.hcount_index(i))), -double(i)});
    for (int u = 0; u < n; ++u)
      if (u != v) {
        c21.lin.push_back({m.var(var_db(u, v)), -1.0});
        c21.lin.push_back({m.var(var_tb(u, v)), -2.0});
      }
  }
  for (int t = 0; t < nt; ++t) {
    if (sp.lb_atom[t] > 0) {
      auto& c = m.add_constraint("C22_lb_" + sp.atom_types[t], "C22", Sense::Ge,
                                 double(sp.lb_atom[t]));
      for (int v = 0; v < n; ++v) c.lin.push_back({m.var(var_x(v, sp.type_index(t))), 1.0});
    }
    auto& c = m.add_constraint("C22_ub_" + sp.atom_types[t], "C22", Sense::Le,
                               double(sp.ub_atom[t]));
    for (int v = 0; v < n; ++v) c.lin.push_back({m.var(var_x(v, sp.type_index(t))), 1.0});
  }
  {
    auto& c = m.add_constraint("C23_ub", "C23", Sense::Le, double(sp.ub_db));
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) c.lin.push_back({m.var(var_db(u, v)), 1.0});
    if (sp.lb_db > 0) {
      auto& lb = m.add_constraint("C23_lb", "C23", Sense::Ge, double(sp.lb_db));
      lb.lin = c.lin;
    }
  }
  {
    auto& c = m.add_constraint("C24_ub", "C24", Sense::Le, double(sp.ub_tb));
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) c.lin.push_back({m.var(var_tb(u, v)), 1.0});
    if (sp.lb_tb > 0) {
      auto& lb = m.add_constraint("C24_lb", "C24", Sense::Ge, double(sp.lb_tb));
      lb.lin = c.lin;
    }
  }
  {
    auto& c = m.add_constraint("C25_ub", "C25", Sense::Le, double(sp.ub_ring + n - 1));
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) c.lin.push_back({m.var(var_a(u, v)), 1.0});
    if (sp.lb_ring > 0) {
      auto& lb = m.add_constraint("C25_lb", "C25", Sense::Ge, double(sp.lb_ring + n - 1));
      lb.lin = c.lin;
    }
  }

  if (symmetry) {
    for (int v = 1; v < n; ++v) {
      auto& c = m.add_constraint("C26_" + std::to_string(v), "C26", Sense::Le, 0);
      for (int fi = 0; fi < F; ++fi) {
        const double w = std::ldexp(1.0, F - 1 - fi);
        c.lin.push_back({m.var(var_x(0, fi)), w});
        c.lin.push_back({m.var(var_x(v, fi)), -w});
      }
    }
    for (int v = 1; v + 1 < n; ++v) {
      auto& c = m.add_constraint("C27_" + std::to_string(v), "C27", Sense::Ge, 0);
      for (int u = 0; u < n; ++u) {
        if (u == v || u == v + 1) continue;
        const double w = std::ldexp(1.0, n - 1 - u);
        c.lin.push_back({m.var(var_a(u, v)), w});
        c.lin.push_back({m.var(var_a(u, v + 1)), -w});
      }
    }
  }

  // --- network encoding ---------------------------------------------------
  auto prev_var = [&](int i, int u, int c) {
    return i == 0 ? m.var(var_x(u, c)) : m.var(detail::var_gx(i, u, c));
  };
  for (int i = 0; i < n_glayers; ++i) {
    const GraphLayer& gl = gnn.graph_layers[i];
    const int layer = i + 1;
    const int din = gl.w_self.cols, dout = gl.w_self.rows;
    const auto& in_bounds = bt.layer_input(i);

    if (variant == MilpVariant::BigM) {
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          if (u == v) continue;
          const int e = m.var(var_a(u, v));
          for (int c = 0; c < din; ++c) {
            const int z = m.var(detail::var_z(layer, u, v, c));
            const int x = prev_var(i, u, c);
            const double M = detail::big_m_of(in_bounds[u][c]);
            const std::string tag = "z_g" + std::to_string(layer) + "_" + std::to_string(u) + "_" +
                                    std::to_string(v) + "_" + std::to_string(c);
            {
              auto& r = m.add_constraint(tag + "_ub", "zlink", Sense::Le, M);
              r.lin = {{z, 1.0}, {x, -1.0}, {e, M}};
            }
            {
              auto& r = m.add_constraint(tag + "_lb", "zlink", Sense::Le, M);
              r.lin = {{z, -1.0}, {x, 1.0}, {e, M}};
            }
            {
              auto& r = m.add_constraint(tag + "_on", "zlink", Sense::Le, 0);
              r.lin = {{z, 1.0}, {e, -M}};
            }
            {
              auto& r = m.add_constraint(tag + "_off", "zlink", Sense::Le, 0);
              r.lin = {{z, -1.0}, {e, -M}};
            }
          }
        }
    }

    for (int v = 0; v < n; ++v)
      for (int c = 0; c < dout; ++c) {
        auto& def = m.add_constraint("gdef_g" + std::to_string(layer) + "_" + std::to_string(v) +
                                         "_" + std::to_string(c),
                                     "glayer", Sense::Eq, gl.bias[c]);
        def.lin.push_back({m.var(detail::var_gpre(layer, v, c)), 1.0});
        for (int j = 0; j < din; ++j) {
          if (gl.w_self.at(c, j) != 0) def.lin.push_back({prev_var(i, v, j), -gl.w_self.at(c, j)});
          for (int u = 0; u < n; ++u) {
            if (u == v || gl.w_neigh.at(c, j) == 0) continue;
            if (variant == MilpVariant::BigM)
              def.lin.push_back({m.var(detail::var_z(layer, u, v, j)), -gl.w_neigh.at(c, j)});
            else
              def.quad.push_back({m.var(var_a(u, v)), prev_var(i, u, j), -gl.w_neigh.at(c, j)});
          }
        }
        const int pre = m.var(detail::var_gpre(layer, v, c));
        const int out = m.var(detail::var_gx(layer, v, c));
        if (gl.act == Activation::Relu) {
          detail::add_relu_rows(m,
                                "grelu_g" + std::to_string(layer) + "_" + std::to_string(v) + "_" +
                                    std::to_string(c),
                                out, pre, m.var(detail::var_grelu(layer, v, c)),
                                bt.graph_pre[i][v][c].lo, bt.graph_pre[i][v][c].hi);
        } else {
          auto& eq = m.add_constraint("gact_g" + std::to_string(layer) + "_" + std::to_string(v) +
                                          "_" + std::to_string(c),
                                      "glayer", Sense::Eq, 0);
          eq.lin = {{out, 1.0}, {pre, -1.0}};
        }
      }
  }

  const double pool_coef = gnn.mean_pool ? 1.0 / n : 1.0;
  for (int c = 0; c < gnn.pooled_width(); ++c) {
    auto& eq = m.add_constraint("pool_" + std::to_string(c), "pool", Sense::Eq, 0);
    eq.lin.push_back({m.var(detail::var_pool(c)), 1.0});
    for (int v = 0; v < n; ++v) {
      const int src = n_glayers == 0 ? m.var(var_x(v, c)) : m.var(detail::var_gx(n_glayers, v, c));
      eq.lin.push_back({src, -pool_coef});
    }
  }

  for (std::size_t k = 0; k < gnn.dense_layers.size(); ++k) {
    const DenseLayer& dl = gnn.dense_layers[k];
    const int layer = static_cast<int>(k) + 1;
    for (int c = 0; c < dl.w.rows; ++c) {
      auto& def = m.add_constraint("ddef_d" + std::to_string(layer) + "_" + std::to_string(c),
                                   "dlayer", Sense::Eq, dl.bias[c]);
      def.lin.push_back({m.var(detail::var_dpre(layer, c)), 1.0});
      for (int j = 0; j < dl.w.cols; ++j) {
        if (dl.w.at(c, j) == 0) continue;
        const int src = k == 0 ? m.var(detail::var_pool(j))
                               : m.var(detail::var_dx(static_cast<int>(k), j));
        def.lin.push_back({src, -dl.w.at(c, j)});
      }
      const int pre = m.var(detail::var_dpre(layer, c));
      const int out = m.var(detail::var_dx(layer, c));
      if (dl.act == Activation::Relu) {
        detail::add_relu_rows(m, "drelu_d" + std::to_string(layer) + "_" + std::to_string(c), out,
                              pre, m.var(detail::var_drelu(layer, c)), bt.dense_pre[k][c].lo,
                              bt.dense_pre[k][c].hi);
      } else {
        auto& eq = m.add_constraint("dact_d" + std::to_string(layer) + "_" + std::to_string(c),
                                    "dlayer", Sense::Eq, 0);
        eq.lin = {{out, 1.0}, {pre, -1.0}};
      }
    }
  }

  const int out_var = gnn.dense_layers.empty()
                          ? m.var(detail::var_pool(0))
                          : m.var(detail::var_dx(static_cast<int>(gnn.dense_layers.size()), 0));
  m.objective = {{out_var, 1.0}};
  return m;
}

namespace detail {

inline void append_terms(std::string& out, const std::vector<LinTerm>& lin,
                         const std::vector<QuadTerm>& quad, const MilpModel& m) {
  bool first = true;
  auto sign = [&](double c) {
    if (first) {
      if (c < 0) out += "- ";
      first = false;
    } else {
      out += c < 0 ? " - " : " + ";
    }
    return std::fabs(c);
  };
  for (const LinTerm& t : lin) {
    const double mag = sign(t.coef);
    if (mag != 1.0) {
      out += fmt_num(mag);
      out += ' ';
    }
    out += m.variables[t.var].name;
  }
  if (!quad.empty()) {
    out += first ? "[ " : " + [ ";
    first = true;
    for (const QuadTerm& t : quad) {
      const double mag = sign(t.coef);
      if (mag != 1.0) {
        out += fmt_num(mag);
        out += ' ';
      }
      out += m.variables[t.a].name;
      out += " * ";
      out += m.variables[t.b].name;
    }
    out += " ]";
  }
}

}  // namespace detail

/// Deterministic LP text: variables in declaration order, shortest
/// round-tripping coefficients, quadratic terms in brackets.
inline std::string emit_lp(const MilpModel& m) {
  std::string out = "\\ molmip model\nMinimize\n obj:";
  {
    std::string terms;
    detail::append_terms(terms, m.objective, {}, m);
    if (!terms.empty()) out += " " + terms;
  }
  out += "\nSubject To\n";
  for (const MilpConstraint& c : m.constraints) {
    out += " " + c.name + ": ";
    detail::append_terms(out, c.lin, c.quad, m);
    out += c.sense == Sense::Le ? " <= " : (c.sense == Sense::Eq ? " = " : " >= ");
    out += detail::fmt_num(c.rhs);
    out += '\n';
  }
  out += "Bounds\n";
  for (const MilpVariable& v : m.variables) {
    if (v.lo == v.hi) {
      out += " " + v.name + " = " + detail::fmt_num(v.lo) + "\n";
    } else if (v.kind == VarKind::Continuous) {
      out += " " + detail::fmt_num(v.lo) + " <= " + v.name + " <= " + detail::fmt_num(v.hi) + "\n";
    }
  }
  bool any_bin = false;
  for (const MilpVariable& v : m.variables) any_bin |= v.kind == VarKind::Binary;
  if (any_bin) {
    out += "Binaries\n";
    for (const MilpVariable& v : m.variables)
      if (v.kind == VarKind::Binary) out += " " + v.name + "\n";
  }
  out += "End\n";
  return out;
}

/// Deterministic free-format MPS text. Models with bilinear terms are not
/// representable and are rejected.
inline std::string emit_mps(const MilpModel& m) {
  if (m.has_quadratic())
    throw UnsupportedError("emit_mps: bilinear models cannot be written as MPS");
  std::string out = "NAME molmip\nOBJSENSE\n MIN\nROWS\n N obj\n";
  for (const MilpConstraint& c : m.constraints) {
    out += c.sense == Sense::Le ? " L " : (c.sense == Sense::Eq ? " E " : " G ");
    out += c.name;
    out += '\n';
  }
  // Column-major coefficients in variable declaration order.
  std::vector<std::vector<std::pair<int, double>>> cols(m.variables.size());
  for (std::size_t ci = 0; ci < m.constraints.size(); ++ci)
    for (const LinTerm& t : m.constraints[ci].lin)
      cols[t.var].emplace_back(static_cast<int>(ci), t.coef);
  std::vector<double> obj_coef(m.variables.size(), 0.0);
  for (const LinTerm& t : m.objective) obj_coef[t.var] += t.coef;

  out += "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (std::size_t vi = 0; vi < m.variables.size(); ++vi) {
    const MilpVariable& v = m.variables[vi];
    const bool want_int = v.kind == VarKind::Binary;
    if (want_int != in_int) {
      out += " MARKER" + std::to_string(marker++) + " 'MARKER' " +
             (want_int ? "'INTORG'" : "'INTEND'") + "\n";
      in_int = want_int;
    }
    bool wrote = false;
    if (obj_coef[vi] != 0) {
      out += " " + v.name + " obj " + detail::fmt_num(obj_coef[vi]) + "\n";
      wrote = true;
    }
    for (const auto& [ci, coef] : cols[vi]) {
      out += " " + v.name + " " + m.constraints[ci].name + " " + detail::fmt_num(coef) + "\n";
      wrote = true;
    }
    if (!wrote) out += " " + v.name + " obj 0\n";
  }
  if (in_int) out += " MARKER" + std::to_string(marker++) + " 'MARKER' 'INTEND'\n";

  out += "RHS\n";
  for (const MilpConstraint& c : m.constraints)
    if (c.rhs != 0) out += " rhs " + c.name + " " + detail::fmt_num(c.rhs) + "\n";
  out += "BOUNDS\n";
  for (const MilpVariable& v : m.variables) {
    if (v.lo == v.hi) {
      out += " FX bnd " + v.name + " " + detail::fmt_num(v.lo) + "\n";
    } else if (v.kind == VarKind::Binary) {
      out += " BV bnd " + v.name + "\n";
    } else {
      out += " LO bnd " + v.name + " " + detail::fmt_num(v.lo) + "\n";
      out += " UP bnd " + v.name + " " + detail::fmt_num(v.hi) + "\n";
    }
  }
  out += "ENDATA\n";
  return out;
}

// --- serialization ---------------------------------------------------------

inline nlohmann::json milp_to_json(const MilpModel& m) {
  nlohmann::json j;
  j["variant"] = m.variant == MilpVariant::BigM ? "bigm" : "bilinear";
  j["symmetry"] = m.symmetry;
  j["n"] = m.n;
  j["f"] = m.f;
  nlohmann::json vars = nlohmann::json::array();
  for (const MilpVariable& v : m.variables)
    vars.push_back({{"name", v.name},
                    {"kind", v.kind == VarKind::Binary ? "binary" : "continuous"},
                    {"lo", v.lo},
                    {"hi", v.hi}});
  j["variables"] = std::move(vars);
  nlohmann::json cons = nlohmann::json::array();
  for (const MilpConstraint& c : m.constraints) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["family"] = c.family;
    cj["sense"] = c.sense == Sense::Le ? "<=" : (c.sense == Sense::Eq ? "=" : ">=");
    cj["rhs"] = c.rhs;
    nlohmann::json lin = nlohmann::json::array();
    for (const LinTerm& t : c.lin) lin.push_back({t.var, t.coef});
    cj["lin"] = std::move(lin);
    if (!c.quad.empty()) {
      nlohmann::json quad = nlohmann::json::array();
      for (const QuadTerm& t : c.quad) quad.push_back({t.a, t.b, t.coef});
      cj["quad"] = std::move(quad);
    }
    cons.push_back(std::move(cj));
  }
  j["constraints"] = std::move(cons);
  nlohmann::json obj = nlohmann::json::array();
  for (const LinTerm& t : m.objective) obj.push_back({t.var, t.coef});
  j["objective"] = std::move(obj);
  return j;
}

inline MilpModel milp_from_json(const nlohmann::json& j) {
  MilpModel m;
  try {
    m.variant = j.at("variant") == "bigm" ? MilpVariant::BigM : MilpVariant::Bilinear;
    m.symmetry = j.at("symmetry").get<bool>();
    m.n = j.at("n").get<int>();
    m.f = j.at("f").get<int>();
    for (const auto& vj : j.at("variables"))
      m.add_variable(vj.at("name").get<std::string>(),
                     vj.at("kind") == "binary" ? VarKind::Binary : VarKind::Continuous,
                     vj.at("lo").get<double>(), vj.at("hi").get<double>());
    const int nvar = static_cast<int>(m.variables.size());
    auto ref = [&](const nlohmann::json& t, int slot) {
      const int v = t.at(slot).get<int>();
      if (v < 0 || v >= nvar) throw ParseError("milp meta: variable index out of range");
      return v;
    };
    for (const auto& cj : j.at("constraints")) {
      const std::string s = cj.at("sense").get<std::string>();
      auto& c = m.add_constraint(cj.at("name").get<std::string>(),
                                 cj.at("family").get<std::string>(),
                                 s == "<=" ? Sense::Le : (s == "=" ? Sense::Eq : Sense::Ge),
                                 cj.at("rhs").get<double>());
      for (const auto& t : cj.at("lin")) c.lin.push_back({ref(t, 0), t.at(1).get<double>()});
      if (cj.contains("quad"))
        for (const auto& t : cj.at("quad"))
          c.quad.push_back({ref(t, 0), ref(t, 1), t.at(2).get<double>()});
    }
    for (const auto& t : j.at("objective")) m.objective.push_back({ref(t, 0), t.at(1).get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("milp meta: ") + e.what());
  }
  return m;
}

inline void write_milp_meta(const std::string& path, const MilpModel& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write meta file: " + path);
  out << milp_to_json(m).dump() << '\n';
}

inline MilpModel read_milp_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open meta file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return milp_from_json(j);
}

// --- assignments -------------------------------------------------------------

using Assignment = std::map<std::string, double>;

/// Complete variable assignment realizing a feasible molecule: structure bits,
/// gated copies, every layer activation, and the indicator binaries.
inline Assignment embed_solution(const MilpModel& m, const DesignSpace& sp, const Molecule& mol,
                                 const GnnModel& gnn) {
  if (mol.n != m.n || mol.f != m.f)
    throw std::domain_error("embed_solution: molecule does not match the model dimensions");
  {
    const auto report = check_structure(sp, mol);
    std::string msg;
    for (const Violation& v : report) msg += " " + v.constraint + "(" + v.detail + ")";
    if (!report.empty()) throw std::domain_error("embed_solution: infeasible molecule:" + msg);
    if (m.symmetry) {
      if (!check_c26(sp, mol)) throw std::domain_error("embed_solution: infeasible molecule: C26");
      if (!check_c27(sp, mol)) throw std::domain_error("embed_solution: infeasible molecule: C27");
    }
  }
  const ForwardTrace tr = forward_trace(gnn, mol);
  const int n = m.n;
  Assignment a;
  auto set = [&](const std::string& name, double value) {
    m.var(name);  // unknown names are an internal error
    a[name] = value;
  };

  for (int v = 0; v < n; ++v)
    for (int fi = 0; fi < m.f; ++fi) set(detail::var_x(v, fi), mol.xbit(v, fi) ? 1.0 : 0.0);
  for (int u = 0; u < n; ++u)
    for (int v = u; v < n; ++v) set(detail::var_a(u, v), mol.abit(u, v) ? 1.0 : 0.0);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      set(detail::var_db(u, v), mol.dbit(u, v) ? 1.0 : 0.0);
      set(detail::var_tb(u, v), mol.tbit(u, v) ? 1.0 : 0.0);
    }

  const auto x0 = molecule_features(mol);
  for (std::size_t i = 0; i < gnn.graph_layers.size(); ++i) {
    const int layer = static_cast<int>(i) + 1;
    const int din = gnn.graph_layers[i].w_self.cols;
    const int dout = gnn.graph_layers[i].w_self.rows;
    if (m.variant == MilpVariant::BigM) {
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          if (u == v) continue;
          for (int c = 0; c < din; ++c) {
            const double xu = i == 0 ? x0[u][c] : tr.graph_post[i - 1][u][c];
            set(detail::var_z(layer, u, v, c), mol.abit(u, v) ? xu : 0.0);
          }
        }
    }
    for (int v = 0; v < n; ++v)
      for (int c = 0; c < dout; ++c) {
        set(detail::var_gpre(layer, v, c), tr.graph_pre[i][v][c]);
        set(detail::var_gx(layer, v, c), tr.graph_post[i][v][c]);
        if (gnn.graph_layers[i].act == Activation::Relu)
          set(detail::var_grelu(layer, v, c), tr.graph_pre[i][v][c] > 0 ? 1.0 : 0.0);
      }
  }
  for (int c = 0; c < gnn.pooled_width(); ++c) set(detail::var_pool(c), tr.pooled[c]);
  for (std::size_t k = 0; k < gnn.dense_layers.size(); ++k) {
    const int layer = static_cast<int>(k) + 1;
    for (int c = 0; c < gnn.dense_layers[k].w.rows; ++c) {
      set(detail::var_dpre(layer, c), tr.dense_pre[k][c]);
      set(detail::var_dx(layer, c), tr.dense_post[k][c]);
      if (gnn.dense_layers[k].act == Activation::Relu)
        set(detail::var_drelu(layer, c), tr.dense_pre[k][c] > 0 ? 1.0 : 0.0);
    }
  }
  if (a.size() != m.variables.size())
    throw std::logic_error("embed_solution: assignment does not cover every variable");
  return a;
}

struct FamilyResidual {
  std::string family;
  double residual = 0;
  std::string worst;  // constraint (or variable) name attaining the residual
};

struct CheckReport {
  std::vector<FamilyResidual> families;  // first-appearance order
  double max_residual = 0;
  double max_integrality = 0;
  std::string worst_integrality;
  bool pass = false;
};

/// Evaluate every constraint, variable bound, and binary integrality for the
/// assignment; passes when everything is within the tolerance.
inline CheckReport check_assignment(const MilpModel& m, const Assignment& a, double tol = 1e-6) {
  std::vector<double> val(m.variables.size());
  for (std::size_t i = 0; i < m.variables.size(); ++i) {
    auto it = a.find(m.variables[i].name);
    if (it == a.end())
      throw std::domain_error("check_assignment: missing variable " + m.variables[i].name);
    val[i] = it->second;
  }
  CheckReport rep;
  std::unordered_map<std::string, std::size_t> fam_index;
  auto bump = [&](const std::string& family, double residual, const std::string& where) {
    auto [it, fresh] = fam_index.emplace(family, rep.families.size());
    if (fresh) rep.families.push_back({family, residual, where});
    else if (residual > rep.families[it->second].residual) {
      rep.families[it->second].residual = residual;
      rep.families[it->second].worst = where;
    }
    rep.max_residual = std::max(rep.max_residual, residual);
  };

  for (const MilpConstraint& c : m.constraints) {
    double lhs = 0;
    for (const LinTerm& t : c.lin) lhs += t.coef * val[t.var];
    for (const QuadTerm& t : c.quad) lhs += t.coef * val[t.a] * val[t.b];
    double residual = 0;
    switch (c.sense) {
      case Sense::Le: residual = std::max(0.0, lhs - c.rhs); break;
      case Sense::Ge: residual = std::max(0.0, c.rhs - lhs); break;
      case Sense::Eq: residual = std::fabs(lhs - c.rhs); break;
    }
    bump(c.family, residual, c.name);
  }
  for (std::size_t i = 0; i < m.variables.size(); ++i) {
    const MilpVariable& v = m.variables[i];
    const double out = std::max(std::max(v.lo - val[i], val[i] - v.hi), 0.0);
    bump("bounds", out, v.name);
    if (v.kind == VarKind::Binary) {
      const double gap = std::min(std::fabs(val[i]), std::fabs(val[i] - 1.0));
      if (gap > rep.max_integrality) {
        rep.max_integrality = gap;
        rep.worst_integrality = v.name;
      }
    }
  }
  rep.pass = rep.max_residual <= tol && rep.max_integrality <= tol;
  return rep;
}

/// Solution files hold one "name value" pair per line; '#' starts a comment.
inline Assignment read_solution(std::istream& in) {
  Assignment a;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ls(line);
    std::string name;
    double value = 0;
    if (!(ls >> name >> value))
      throw ParseError("solution file line " + std::to_string(lineno) + ": expected 'name value'");
    a[name] = value;
  }
  return a;
}

inline Assignment read_solution_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open solution file: " + path);
  return read_solution(in);
}

}  // namespace molmip
