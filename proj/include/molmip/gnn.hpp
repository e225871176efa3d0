#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "molmip/camd.hpp"
#include "molmip/errors.hpp"
#include "molmip/graph.hpp"

namespace molmip {

enum class Activation { Identity, Relu };

struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;  // row-major

  static Matrix zero(int r, int c) { return Matrix{r, c, std::vector<double>(std::size_t(r) * c, 0.0)}; }
  double& at(int r, int c) { return a[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return a[std::size_t(r) * cols + c]; }
};

/// Message-passing layer with one weight matrix for the node itself and one
/// shared matrix for every neighbor contribution.
struct GraphLayer {
  Matrix w_self, w_neigh;
  std::vector<double> bias;
  Activation act = Activation::Relu;
};

struct DenseLayer {
  Matrix w;
  std::vector<double> bias;
  Activation act = Activation::Relu;
};

/// Layer stack: graph layers, a sum pooling over nodes (optionally scaled by
/// 1/N), then a dense head ending in a single output.
struct GnnModel {
  std::vector<GraphLayer> graph_layers;
  bool mean_pool = false;
  std::vector<DenseLayer> dense_layers;

  int input_width() const {
    if (!graph_layers.empty()) return graph_layers.front().w_self.cols;
    if (!dense_layers.empty()) return dense_layers.front().w.cols;
    return 0;
  }

  int pooled_width() const {
    return graph_layers.empty() ? input_width() : graph_layers.back().w_self.rows;
  }

  int output_width() const {
    return dense_layers.empty() ? pooled_width() : dense_layers.back().w.rows;
  }

  void validate() const {
    if (graph_layers.empty() && dense_layers.empty())
      throw std::domain_error("GnnModel: no layers");
    int width = input_width();
    if (width <= 0) throw std::domain_error("GnnModel: bad input width");
    for (std::size_t i = 0; i < graph_layers.size(); ++i) {
      const GraphLayer& gl = graph_layers[i];
      if (gl.w_self.cols != width || gl.w_neigh.cols != width)
        throw std::domain_error("GnnModel: graph layer " + std::to_string(i) +
                                " input width mismatch");
      if (gl.w_neigh.rows != gl.w_self.rows ||
          static_cast<int>(gl.bias.size()) != gl.w_self.rows)
        throw std::domain_error("GnnModel: graph layer " + std::to_string(i) +
                                " inconsistent shapes");
      width = gl.w_self.rows;
    }
    for (std::size_t i = 0; i < dense_layers.size(); ++i) {
      const DenseLayer& dl = dense_layers[i];
      if (dl.w.cols != width)
        throw std::domain_error("GnnModel: dense layer " + std::to_string(i) +
                                " input width mismatch");
      if (static_cast<int>(dl.bias.size()) != dl.w.rows)
        throw std::domain_error("GnnModel: dense layer " + std::to_string(i) + " bias mismatch");
      width = dl.w.rows;
    }
    if (width != 1) throw std::domain_error("GnnModel: output width must be 1");
  }
};

namespace detail {

inline double activate(Activation a, double x) {
  return a == Activation::Relu ? (x > 0 ? x : 0.0) : x;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ParseError(where + ": expected a non-empty matrix");
  Matrix m;
  m.rows = static_cast<int>(j.size());
  for (int r = 0; r < m.rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array()) throw ParseError(where + " row " + std::to_string(r) + ": expected an array");
    if (r == 0) m.cols = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != m.cols)
      throw ParseError(where + " row " + std::to_string(r) + ": expected " +
                       std::to_string(m.cols) + " entries, got " + std::to_string(row.size()));
    for (const auto& e : row) {
      if (!e.is_number()) throw ParseError(where + " row " + std::to_string(r) + ": non-numeric entry");
      m.a.push_back(e.get<double>());
    }
  }
  return m;
}

inline std::vector<double> vector_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array");
  std::vector<double> v;
  for (const auto& e : j) {
    if (!e.is_number()) throw ParseError(where + ": non-numeric entry");
    v.push_back(e.get<double>());
  }
  return v;
}

inline Activation activation_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_string()) throw ParseError(where + ": expected a string");
  const std::string s = j.get<std::string>();
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ParseError(where + ": unknown activation '" + s + "'");
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline GnnModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("model: expected a JSON object");
  GnnModel m;
  if (j.contains("pooling")) {
    const auto& p = j.at("pooling");
    if (!p.is_string() || (p != "sum" && p != "mean"))
      throw ParseError("pooling: expected \"sum\" or \"mean\"");
    m.mean_pool = (p == "mean");
  }
  if (j.contains("graph_layers")) {
    const auto& layers = j.at("graph_layers");
    if (!layers.is_array()) throw ParseError("graph_layers: expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string where = "graph_layers[" + std::to_string(i) + "]";
      const auto& lj = layers[i];
      if (!lj.is_object() || !lj.contains("w_self") || !lj.contains("w_neigh") ||
          !lj.contains("bias") || !lj.contains("activation"))
        throw ParseError(where + ": need w_self, w_neigh, bias, activation");
      GraphLayer gl;
      gl.w_self = detail::matrix_from_json(lj.at("w_self"), where + ".w_self");
      gl.w_neigh = detail::matrix_from_json(lj.at("w_neigh"), where + ".w_neigh");
      gl.bias = detail::vector_from_json(lj.at("bias"), where + ".bias");
      gl.act = detail::activation_from_json(lj.at("activation"), where + ".activation");
      m.graph_layers.push_back(std::move(gl));
    }
  }
  if (j.contains("dense_layers")) {
    const auto& layers = j.at("dense_layers");
    if (!layers.is_array()) throw ParseError("dense_layers: expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string where = "dense_layers[" + std::to_string(i) + "]";
      const auto& lj = layers[i];
      if (!lj.is_object() || !lj.contains("w") || !lj.contains("bias") ||
          !lj.contains("activation"))
        throw ParseError(where + ": need w, bias, activation");
      DenseLayer dl;
      dl.w = detail::matrix_from_json(lj.at("w"), where + ".w");
      dl.bias = detail::vector_from_json(lj.at("bias"), where + ".bias");
      dl.act = detail::activation_from_json(lj.at("activation"), where + ".activation");
      m.dense_layers.push_back(std::move(dl));
    }
  }
  try {
    m.validate();
  } catch (const std::domain_error& e) {
    throw ParseError(e.what());
  }
  return m;
}

inline nlohmann::json model_to_json(const GnnModel& m) {
  nlohmann::json j;
  j["pooling"] = m.mean_pool ? "mean" : "sum";
  j["graph_layers"] = nlohmann::json::array();
  for (const GraphLayer& gl : m.graph_layers)
    j["graph_layers"].push_back({{"w_self", detail::matrix_to_json(gl.w_self)},
                                 {"w_neigh", detail::matrix_to_json(gl.w_neigh)},
                                 {"bias", gl.bias},
                                 {"activation", gl.act == Activation::Relu ? "relu" : "identity"}});
  j["dense_layers"] = nlohmann::json::array();
  for (const DenseLayer& dl : m.dense_layers)
    j["dense_layers"].push_back({{"w", detail::matrix_to_json(dl.w)},
                                 {"bias", dl.bias},
                                 {"activation", dl.act == Activation::Relu ? "relu" : "identity"}});
  return j;
}

inline GnnModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const std::string& path, const GnnModel& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << model_to_json(m).dump(2) << '\n';
}

/// Every intermediate value of one evaluation, indexed like the model layers.
struct ForwardTrace {
  std::vector<std::vector<std::vector<double>>> graph_pre, graph_post;  // [layer][node][chan]
  std::vector<double> pooled;
  std::vector<std::vector<double>> dense_pre, dense_post;  // [layer][chan]
  double output = 0;
};

inline ForwardTrace forward_trace(const GnnModel& m, const std::vector<std::uint32_t>& adj,
                                  std::vector<std::vector<double>> cur) {
  m.validate();
  const int n = static_cast<int>(adj.size());
  if (n < 1) throw std::domain_error("forward: empty graph");
  for (const auto& row : cur)
    if (static_cast<int>(row.size()) != m.input_width())
      throw std::domain_error("forward: feature width does not match the model input");

  ForwardTrace tr;
  for (const GraphLayer& gl : m.graph_layers) {
    const int din = gl.w_self.cols, dout = gl.w_self.rows;
    std::vector<std::vector<double>> nsum(n, std::vector<double>(din, 0.0));
    for (int v = 0; v < n; ++v)
      for (std::uint32_t rest = adj[v]; rest != 0; rest &= rest - 1) {
        const int u = std::countr_zero(rest);
        for (int j = 0; j < din; ++j) nsum[v][j] += cur[u][j];
      }
    std::vector<std::vector<double>> pre(n, std::vector<double>(dout)), post = pre;
    for (int v = 0; v < n; ++v)
      for (int c = 0; c < dout; ++c) {
        double s = gl.bias[c];
        for (int j = 0; j < din; ++j)
          s += gl.w_self.at(c, j) * cur[v][j] + gl.w_neigh.at(c, j) * nsum[v][j];
        pre[v][c] = s;
        post[v][c] = detail::activate(gl.act, s);
      }
    tr.graph_pre.push_back(std::move(pre));
    tr.graph_post.push_back(post);
    cur = std::move(post);
  }

  const int pw = m.pooled_width();
  tr.pooled.assign(pw, 0.0);
  for (int c = 0; c < pw; ++c) {
    double s = 0;
    for (int v = 0; v < n; ++v) s += cur[v][c];
    tr.pooled[c] = m.mean_pool ? s / n : s;
  }

  std::vector<double> h = tr.pooled;
  for (const DenseLayer& dl : m.dense_layers) {
    std::vector<double> pre(dl.w.rows), post(dl.w.rows);
    for (int c = 0; c < dl.w.rows; ++c) {
      double s = dl.bias[c];
      for (int j = 0; j < dl.w.cols; ++j) s += dl.w.at(c, j) * h[j];
      pre[c] = s;
      post[c] = detail::activate(dl.act, s);
    }
    tr.dense_pre.push_back(std::move(pre));
    tr.dense_post.push_back(post);
    h = std::move(post);
  }
  tr.output = h[0];
  return tr;
}

inline double forward(const GnnModel& m, const std::vector<std::uint32_t>& adj,
                      const std::vector<std::vector<double>>& x0) {
  return forward_trace(m, adj, x0).output;
}

inline std::vector<std::vector<double>> molecule_features(const Molecule& mol) {
  std::vector<std::vector<double>> x(mol.n, std::vector<double>(mol.f));
  for (int v = 0; v < mol.n; ++v)
    for (int k = 0; k < mol.f; ++k) x[v][k] = mol.xbit(v, k) ? 1.0 : 0.0;
  return x;
}

inline ForwardTrace forward_trace(const GnnModel& m, const Molecule& mol) {
  std::vector<std::uint32_t> adj(mol.n);
  for (int v = 0; v < mol.n; ++v) adj[v] = mol.neighbors_mask(v);
  return forward_trace(m, adj, molecule_features(mol));
}

inline double forward(const GnnModel& m, const Molecule& mol) {
  return forward_trace(m, mol).output;
}

inline double forward(const GnnModel& m, const UndirectedGraph& g) {
  std::vector<std::vector<double>> x(g.n, std::vector<double>(g.f));
  for (int v = 0; v < g.n; ++v)
    for (int k = 0; k < g.f; ++k) x[v][k] = g.features[v][k];
  return forward(m, g.adj, x);
}

struct Interval {
  double lo = 0, hi = 0;
};

/// Per-unit activation intervals, sound for any admissible input graph.
struct BoundsTensor {
  std::vector<std::vector<Interval>> input;                           // [node][chan]
  std::vector<std::vector<std::vector<Interval>>> graph_pre;          // [layer][node][chan]
  std::vector<std::vector<std::vector<Interval>>> graph_post;
  std::vector<Interval> pooled;
  std::vector<std::vector<Interval>> dense_pre, dense_post;           // [layer][chan]

  /// Activation bounds feeding graph layer `l` (0 = model input).
  const std::vector<std::vector<Interval>>& layer_input(int l) const {
    return l == 0 ? input : graph_post[l - 1];
  }
};

/// Interval propagation through the layer stack with binary inputs in [0,1]
/// and every potential neighbor treated as present-or-absent, so each neighbor
/// contribution interval is hulled with zero.
inline BoundsTensor propagate_bounds(const GnnModel& m, int n_nodes) {
  m.validate();
  if (n_nodes < 1) throw std::domain_error("propagate_bounds: need at least one node");
  const int n = n_nodes;

  auto affine_interval = [](const Matrix& w, int row, const std::vector<Interval>& in) {
    Interval r{0, 0};
    for (int j = 0; j < w.cols; ++j) {
      const double c = w.at(row, j);
      r.lo += c >= 0 ? c * in[j].lo : c * in[j].hi;
      r.hi += c >= 0 ? c * in[j].hi : c * in[j].lo;
    }
    return r;
  };

  BoundsTensor bt;
  bt.input.assign(n, std::vector<Interval>(m.input_width(), Interval{0.0, 1.0}));

  std::vector<std::vector<Interval>> cur = bt.input;
  for (const GraphLayer& gl : m.graph_layers) {
    const int dout = gl.w_self.rows;
    std::vector<std::vector<Interval>> pre(n, std::vector<Interval>(dout)), post = pre;
    for (int v = 0; v < n; ++v)
      for (int c = 0; c < dout; ++c) {
        Interval acc = affine_interval(gl.w_self, c, cur[v]);
        acc.lo += gl.bias[c];
        acc.hi += gl.bias[c];
        for (int u = 0; u < n; ++u) {
          if (u == v) continue;
          Interval nb = affine_interval(gl.w_neigh, c, cur[u]);
          acc.lo += std::min(0.0, nb.lo);
          acc.hi += std::max(0.0, nb.hi);
        }
        pre[v][c] = acc;
        post[v][c] = gl.act == Activation::Relu
                         ? Interval{std::max(0.0, acc.lo), std::max(0.0, acc.hi)}
                         : acc;
      }
    bt.graph_pre.push_back(std::move(pre));
    bt.graph_post.push_back(post);
    cur = std::move(post);
  }

  bt.pooled.assign(m.pooled_width(), Interval{0, 0});
  for (int c = 0; c < m.pooled_width(); ++c) {
    Interval s{0, 0};
    for (int v = 0; v < n; ++v) {
      s.lo += cur[v][c].lo;
      s.hi += cur[v][c].hi;
    }
    if (m.mean_pool) {
      s.lo /= n;
      s.hi /= n;
    }
    bt.pooled[c] = s;
  }

  std::vector<Interval> h = bt.pooled;
  for (const DenseLayer& dl : m.dense_layers) {
    std::vector<Interval> pre(dl.w.rows), post(dl.w.rows);
    for (int c = 0; c < dl.w.rows; ++c) {
      Interval acc = affine_interval(dl.w, c, h);
      acc.lo += dl.bias[c];
      acc.hi += dl.bias[c];
      pre[c] = acc;
      post[c] = dl.act == Activation::Relu
                    ? Interval{std::max(0.0, acc.lo), std::max(0.0, acc.hi)}
                    : acc;
    }
    bt.dense_pre.push_back(std::move(pre));
    bt.dense_post.push_back(post);
    h = std::move(post);
  }
  return bt;
}

inline BoundsTensor propagate_bounds(const GnnModel& m, const DesignSpace& sp) {
  if (m.input_width() != sp.feature_count())
    throw std::domain_error("propagate_bounds: model input width != design-space feature count");
  return propagate_bounds(m, sp.n);
}

}  // namespace molmip
