#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "molmip/errors.hpp"

namespace molmip {

/// Parameters of a molecular design space: atom inventory, covalences, the
/// feature-block layout, and per-space count bounds.
struct DesignSpace {
  std::string name;
  int n = 0;                            // heavy-atom count
  std::vector<std::string> atom_types;  // e.g. C,N,O,S
  std::vector<int> covalence;           // per atom type
  std::vector<int> lb_atom, ub_atom;    // per atom type
  int lb_db = 0, ub_db = 0;
  int lb_tb = 0, ub_tb = 0;
  int lb_ring = 0, ub_ring = 0;
  int neighbor_slots = 5;  // encodable neighbor counts 0..4
  int hydrogen_slots = 5;  // encodable hydrogen counts 0..4

  int num_types() const { return static_cast<int>(atom_types.size()); }
  int feature_count() const { return num_types() + neighbor_slots + hydrogen_slots + 2; }

  // Feature-block layout: type bits, neighbor-count bits, hydrogen-count bits,
  // then the double- and triple-bond flags.
  int type_index(int t) const { return t; }
  int ncount_index(int i) const { return num_types() + i; }
  int hcount_index(int i) const { return num_types() + neighbor_slots + i; }
  int db_flag_index() const { return num_types() + neighbor_slots + hydrogen_slots; }
  int tb_flag_index() const { return db_flag_index() + 1; }

  int max_covalence() const {
    int m = 0;
    for (int c : covalence) m = std::max(m, c);
    return m;
  }

  /// Bit value of feature fi inside a packed row (weight 2^(F-1-fi)).
  std::uint32_t feature_bit(int fi) const { return 1u << (feature_count() - 1 - fi); }

  /// Packed feature row for a node with the given type, neighbor count,
  /// hydrogen count, and bond-type flags. The numeric value of the row equals
  /// its hierarchy value under the universal ordering vector.
  std::uint32_t feature_row(int type, int ncount, int hcount, bool dbf, bool tbf) const {
    std::uint32_t row = feature_bit(type_index(type)) | feature_bit(ncount_index(ncount)) |
                        feature_bit(hcount_index(hcount));
    if (dbf) row |= feature_bit(db_flag_index());
    if (tbf) row |= feature_bit(tb_flag_index());
    return row;
  }

  void validate() const {
    if (n < 2) throw std::domain_error("DesignSpace: need at least 2 atoms");
    if (n > 31) throw std::domain_error("DesignSpace: atom count above 31 unsupported");
    if (atom_types.empty() || covalence.size() != atom_types.size() ||
        lb_atom.size() != atom_types.size() || ub_atom.size() != atom_types.size())
      throw std::domain_error("DesignSpace: inconsistent atom-type tables");
    if (feature_count() > 32) throw std::domain_error("DesignSpace: feature count above 32");
    for (int c : covalence)
      if (c <= 0) throw std::domain_error("DesignSpace: covalence must be positive");
    for (std::size_t i = 0; i < atom_types.size(); ++i)
      if (lb_atom[i] < 0 || ub_atom[i] < 0 || lb_atom[i] > n || ub_atom[i] > n)
        throw std::domain_error("DesignSpace: atom bounds outside [0, N]");
    const int pair_cap = n * (n - 1) / 2;
    for (int b : {lb_db, ub_db, lb_tb, ub_tb, lb_ring, ub_ring})
      if (b < 0 || b > pair_cap) throw std::domain_error("DesignSpace: bond/ring bound outside range");
  }
};

/// QM7-style space over C,N,O,S: covalences 4,3,2,2 and count bounds derived
/// from the dataset ratios.
inline DesignSpace qm7_space(int n) {
  if (n < 2) throw std::domain_error("qm7_space: need N >= 2");
  DesignSpace sp;
  sp.name = "qm7";
  sp.n = n;
  sp.atom_types = {"C", "N", "O", "S"};
  sp.covalence = {4, 3, 2, 2};
  sp.lb_atom = {(n + 1) / 2, 0, 0, 0};
  sp.ub_atom = {n, std::max(1, 3 * n / 7), std::max(1, n / 3), std::max(1, n / 7)};
  sp.ub_db = n / 2;
  sp.ub_tb = n / 2;
  sp.ub_ring = n / 2;
  sp.validate();
  return sp;
}

/// QM9-style space over C,N,O,F: covalences 4,3,2,1.
inline DesignSpace qm9_space(int n) {
  if (n < 2) throw std::domain_error("qm9_space: need N >= 2");
  DesignSpace sp;
  sp.name = "qm9";
  sp.n = n;
  sp.atom_types = {"C", "N", "O", "F"};
  sp.covalence = {4, 3, 2, 1};
  sp.lb_atom = {(n + 4) / 5, 0, 0, 0};
  sp.ub_atom = {n, 3 * n / 5, 4 * n / 7, 4 * n / 5};
  sp.ub_db = n / 2;
  sp.ub_tb = n / 2;
  sp.ub_ring = 2 * n / 3;
  sp.validate();
  return sp;
}

/// Candidate molecular graph: packed binary feature rows plus full symmetric
/// bond matrices. The adjacency diagonal holds node existence (all 1 in
/// exact-N mode); DB/TB diagonals are zero for well-formed molecules.
struct Molecule {
  int n = 0;
  int f = 0;
  std::vector<std::uint32_t> x;   // bit (f-1-fi) of x[v] is feature fi of node v
  std::vector<std::uint32_t> a;   // full rows, diagonal included
  std::vector<std::uint32_t> db;  // full rows
  std::vector<std::uint32_t> tb;  // full rows

  static Molecule make(int n, int f) {
    if (n < 1 || n > 31) throw std::domain_error("Molecule: bad node count");
    if (f < 1 || f > 32) throw std::domain_error("Molecule: bad feature count");
    Molecule m;
    m.n = n;
    m.f = f;
    m.x.assign(n, 0u);
    m.a.assign(n, 0u);
    m.db.assign(n, 0u);
    m.tb.assign(n, 0u);
    for (int v = 0; v < n; ++v) m.a[v] |= 1u << v;  // exact-N default: every node exists
    return m;
  }

  bool xbit(int v, int fi) const { return (x[v] >> (f - 1 - fi)) & 1u; }
  void set_xbit(int v, int fi, bool on) {
    std::uint32_t b = 1u << (f - 1 - fi);
    x[v] = on ? (x[v] | b) : (x[v] & ~b);
  }

  bool abit(int u, int v) const { return (a[u] >> v) & 1u; }
  bool dbit(int u, int v) const { return (db[u] >> v) & 1u; }
  bool tbit(int u, int v) const { return (tb[u] >> v) & 1u; }

  bool exists(int v) const { return abit(v, v); }
  void set_exists(int v, bool on) { set_entry(a, v, v, on); }

  void set_bond(int u, int v, bool on) {
    if (u == v) throw std::domain_error("set_bond: diagonal is node existence");
    set_entry(a, u, v, on);
    set_entry(a, v, u, on);
  }
  void set_double(int u, int v, bool on) {
    set_entry(db, u, v, on);
    set_entry(db, v, u, on);
  }
  void set_triple(int u, int v, bool on) {
    set_entry(tb, u, v, on);
    set_entry(tb, v, u, on);
  }

  std::uint32_t neighbors_mask(int v) const { return a[v] & ~(1u << v); }
  int degree(int v) const { return std::popcount(neighbors_mask(v)); }
  int double_count(int v) const { return std::popcount(db[v]); }
  int triple_count(int v) const { return std::popcount(tb[v]); }

  int bond_edges() const {
    int e = 0;
    for (int v = 0; v < n; ++v) e += degree(v);
    return e / 2;
  }

 private:
  static void set_entry(std::vector<std::uint32_t>& m, int u, int v, bool on) {
    std::uint32_t b = 1u << v;
    m[u] = on ? (m[u] | b) : (m[u] & ~b);
  }
};

/// One failed structural constraint with the offending indices.
struct Violation {
  std::string constraint;
  std::string detail;
};

/// Evaluate the structural constraint system over a candidate molecule.
/// Returns an empty report exactly when every constraint holds. In exact-N
/// mode the adjacency diagonal is required to be all ones; otherwise node
/// existence may decrease with the index.
inline std::vector<Violation> check_structure(const DesignSpace& sp, const Molecule& mol,
                                              bool exact_n = true) {
  if (mol.n != sp.n || mol.f != sp.feature_count())
    throw std::domain_error("check_structure: molecule does not match the design space");
  std::vector<Violation> out;
  auto add = [&](const char* id, std::string detail) {
    out.push_back({id, std::move(detail)});
  };
  auto node = [](int v) { return std::to_string(v); };
  auto pair_str = [](int u, int v) { return std::to_string(u) + "," + std::to_string(v); };
  const int n = mol.n;
  const int nt = sp.num_types();

  if (!mol.exists(0)) add("C1", "A_0_0 != 1");
  if (!mol.exists(1)) add("C1", "A_1_1 != 1");
  if (!mol.abit(0, 1)) add("C1", "A_0_1 != 1");

  if (exact_n) {
    for (int v = 0; v < n; ++v)
      if (!mol.exists(v)) add("C2", "node " + node(v) + " must exist in exact-N mode");
  } else {
    for (int v = 0; v + 1 < n; ++v)
      if (!mol.exists(v) && mol.exists(v + 1))
        add("C2", "node " + node(v + 1) + " exists but node " + node(v) + " does not");
  }

  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      if (mol.abit(u, v) != mol.abit(v, u)) add("C3", "A asymmetric at " + pair_str(u, v));
      if (mol.dbit(u, v) != mol.dbit(v, u)) add("C7", "DB asymmetric at " + pair_str(u, v));
      if (mol.tbit(u, v) != mol.tbit(v, u)) add("C9", "TB asymmetric at " + pair_str(u, v));
    }

  for (int v = 0; v < n; ++v) {
    if ((n - 1) * (mol.exists(v) ? 1 : 0) < mol.degree(v))
      add("C4", "node " + node(v) + " is bonded but does not exist");
    if (v >= 1 && mol.exists(v)) {
      bool linked_below = (mol.neighbors_mask(v) & ((1u << v) - 1u)) != 0;
      if (!linked_below) add("C5", "node " + node(v) + " has no bond to a smaller index");
    }
    if (mol.dbit(v, v)) add("C6", "DB_" + node(v) + "_" + node(v) + " != 0");
    if (mol.tbit(v, v)) add("C8", "TB_" + node(v) + "_" + node(v) + " != 0");
  }

  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if ((mol.dbit(u, v) ? 1 : 0) + (mol.tbit(u, v) ? 1 : 0) > (mol.abit(u, v) ? 1 : 0))
        add("C10", "more than one bond type at " + pair_str(u, v));

  auto block_sum = [&](int v, int off, int width) {
    int s = 0;
    for (int i = 0; i < width; ++i) s += mol.xbit(v, off + i) ? 1 : 0;
    return s;
  };
  auto weighted_block = [&](int v, int off, int width) {
    int s = 0;
    for (int i = 0; i < width; ++i) s += i * (mol.xbit(v, off + i) ? 1 : 0);
    return s;
  };

  for (int v = 0; v < n; ++v) {
    const int e = mol.exists(v) ? 1 : 0;
    if (block_sum(v, sp.type_index(0), nt) != e)
      add("C11", "node " + node(v) + ": type block is not one-hot");
    if (block_sum(v, sp.ncount_index(0), sp.neighbor_slots) != e)
      add("C12", "node " + node(v) + ": neighbor-count block is not one-hot");
    if (block_sum(v, sp.hcount_index(0), sp.hydrogen_slots) != e)
      add("C13", "node " + node(v) + ": hydrogen-count block is not one-hot");
    if (mol.degree(v) != weighted_block(v, sp.ncount_index(0), sp.neighbor_slots))
      add("C14", "node " + node(v) + ": degree " + std::to_string(mol.degree(v)) +
                     " does not match the encoded neighbor count");
  }

  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      if (3 * (mol.dbit(u, v) ? 1 : 0) >
          (mol.xbit(u, sp.db_flag_index()) ? 1 : 0) + (mol.xbit(v, sp.db_flag_index()) ? 1 : 0) +
              (mol.abit(u, v) ? 1 : 0))
        add("C15", "double bond at " + pair_str(u, v) + " lacks flags or adjacency");
      if (3 * (mol.tbit(u, v) ? 1 : 0) >
          (mol.xbit(u, sp.tb_flag_index()) ? 1 : 0) + (mol.xbit(v, sp.tb_flag_index()) ? 1 : 0) +
              (mol.abit(u, v) ? 1 : 0))
        add("C16", "triple bond at " + pair_str(u, v) + " lacks flags or adjacency");
    }

  for (int v = 0; v < n; ++v) {
    int cap_db = 0, cap_tb = 0, cov = 0;
    for (int t = 0; t < nt; ++t)
      if (mol.xbit(v, sp.type_index(t))) {
        cap_db += sp.covalence[t] / 2;
        cap_tb += sp.covalence[t] / 3;
        cov += sp.covalence[t];
      }
    if (mol.double_count(v) > cap_db)
      add("C17", "node " + node(v) + ": too many double bonds for its covalence");
    if (mol.triple_count(v) > cap_tb)
      add("C18", "node " + node(v) + ": too many triple bonds for its covalence");
    if (mol.xbit(v, sp.db_flag_index()) && mol.double_count(v) == 0)
      add("C19", "node " + node(v) + ": double-bond flag set without a double bond");
    if (mol.xbit(v, sp.tb_flag_index()) && mol.triple_count(v) == 0)
      add("C20", "node " + node(v) + ": triple-bond flag set without a triple bond");
    const int balance = weighted_block(v, sp.ncount_index(0), sp.neighbor_slots) +
                        weighted_block(v, sp.hcount_index(0), sp.hydrogen_slots) +
                        mol.double_count(v) + 2 * mol.triple_count(v);
    if (cov != balance)
      add("C21", "node " + node(v) + ": covalence " + std::to_string(cov) +
                     " != bond/hydrogen total " + std::to_string(balance));
  }

  for (int t = 0; t < nt; ++t) {
    int cnt = 0;
    for (int v = 0; v < n; ++v) cnt += mol.xbit(v, sp.type_index(t)) ? 1 : 0;
    if (cnt < sp.lb_atom[t] || cnt > sp.ub_atom[t])
      add("C22", sp.atom_types[t] + " count " + std::to_string(cnt) + " outside [" +
                     std::to_string(sp.lb_atom[t]) + ", " + std::to_string(sp.ub_atom[t]) + "]");
  }
  int total_db = 0, total_tb = 0, total_edges = 0;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      total_db += mol.dbit(u, v) ? 1 : 0;
      total_tb += mol.tbit(u, v) ? 1 : 0;
      total_edges += mol.abit(u, v) ? 1 : 0;
    }
  if (total_db < sp.lb_db || total_db > sp.ub_db)
    add("C23", "double-bond count " + std::to_string(total_db) + " outside bounds");
  if (total_tb < sp.lb_tb || total_tb > sp.ub_tb)
    add("C24", "triple-bond count " + std::to_string(total_tb) + " outside bounds");
  const int rings = total_edges - (n - 1);
  if (rings < sp.lb_ring || rings > sp.ub_ring)
    add("C25", "ring count " + std::to_string(rings) + " outside bounds");

  return out;
}

/// Node 0 has the minimal packed feature row. In variable-N mode rows of
/// non-existing nodes are relaxed by 2^F.
inline bool check_c26(const DesignSpace& sp, const Molecule& mol, bool exact_n = true) {
  if (mol.n != sp.n || mol.f != sp.feature_count())
    throw std::domain_error("check_c26: dimension mismatch");
  const std::uint64_t relax = 1ull << sp.feature_count();
  for (int v = 1; v < mol.n; ++v) {
    std::uint64_t rhs = mol.x[v];
    if (!exact_n && !mol.exists(v)) rhs += relax;
    if (static_cast<std::uint64_t>(mol.x[0]) > rhs) return false;
  }
  return true;
}

namespace detail {

/// Binary-weighted encoding of the bond column of node v, ignoring the
/// diagonal and the entry toward `skip`.
inline std::uint64_t neighbor_weight_sum(const Molecule& mol, int v, int skip) {
  std::uint32_t m = mol.a[v] & ~(1u << v) & ~(1u << skip);
  std::uint64_t s = 0;
  for (std::uint32_t rest = m; rest != 0; rest &= rest - 1)
    s += 1ull << (mol.n - 1 - std::countr_zero(rest));
  return s;
}

}  // namespace detail

/// Consecutive-index neighbor-set dominance via binary-weighted column sums:
/// for each v in 1..N-2 the weighted bonds of v (ignoring v+1) are at least
/// the weighted bonds of v+1 (ignoring v).
inline bool check_c27(const DesignSpace& sp, const Molecule& mol) {
  if (mol.n != sp.n || mol.f != sp.feature_count())
    throw std::domain_error("check_c27: dimension mismatch");
  for (int v = 1; v + 1 < mol.n; ++v)
    if (detail::neighbor_weight_sum(mol, v, v + 1) < detail::neighbor_weight_sum(mol, v + 1, v))
      return false;
  return true;
}

/// Molecule fixture: the graph fixture layout followed by two extra N x N
/// blocks for DB and TB.
inline Molecule read_molecule(std::istream& in) {
  int n = 0, f = 0;
  if (!(in >> n >> f)) throw ParseError("molecule fixture: expected header 'N F'");
  if (n < 1 || n > 31 || f < 1 || f > 32) throw ParseError("molecule fixture: bad dimensions");
  Molecule mol = Molecule::make(n, f);
  auto read_bit = [&](const char* what, int row, int col) {
    int b = 0;
    if (!(in >> b) || (b != 0 && b != 1))
      throw ParseError(std::string("molecule fixture: bad ") + what + " entry at row " +
                       std::to_string(row) + ", col " + std::to_string(col));
    return b != 0;
  };
  for (int v = 0; v < n; ++v)
    for (int k = 0; k < f; ++k) mol.set_xbit(v, k, read_bit("feature", v, k));
  auto read_block = [&](const char* what, std::vector<std::uint32_t>& rows) {
    for (int v = 0; v < n; ++v) {
      std::uint32_t row = 0;
      for (int u = 0; u < n; ++u)
        if (read_bit(what, v, u)) row |= 1u << u;
      rows[v] = row;
    }
  };
  read_block("adjacency", mol.a);
  read_block("double-bond", mol.db);
  read_block("triple-bond", mol.tb);
  return mol;
}

inline void write_molecule(std::ostream& out, const Molecule& mol) {
  out << mol.n << ' ' << mol.f << '\n';
  for (int v = 0; v < mol.n; ++v) {
    for (int k = 0; k < mol.f; ++k) out << (k ? " " : "") << (mol.xbit(v, k) ? 1 : 0);
    out << '\n';
  }
  auto write_block = [&](const std::vector<std::uint32_t>& rows) {
    for (int v = 0; v < mol.n; ++v) {
      for (int u = 0; u < mol.n; ++u) out << (u ? " " : "") << ((rows[v] >> u) & 1u);
      out << '\n';
    }
  };
  write_block(mol.a);
  write_block(mol.db);
  write_block(mol.tb);
}

}  // namespace molmip
