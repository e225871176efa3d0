#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "molmip/milp.hpp"
#include "test_util.hpp"

using namespace molmip;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GnnModel tiny_model(std::mt19937& rng, int f) {
  return testutil::random_model(f, {2}, {1}, rng, 0.5);
}

long long family_count(const MilpModel& m, const std::string& family) {
  long long k = 0;
  for (const auto& c : m.constraints) k += c.family == family;
  return k;
}

std::vector<Molecule> feasible(const DesignSpace& sp, Level level) {
  std::vector<Molecule> out;
  for_each_feasible(sp, level, [&](const Molecule& m) {
    out.push_back(m);
    return true;
  });
  return out;
}

}  // namespace

TEST_CASE("golden lp and mps for a hand-built model") {
  MilpModel m;
  m.add_variable("x0", VarKind::Continuous, 0, 1);
  m.add_variable("x1", VarKind::Continuous, 0, 2);
  auto& c = m.add_constraint("c0", "demo", Sense::Le, 3);
  c.lin = {{0, 1.0}, {1, 2.0}};
  m.objective = {{0, 1.0}};

  CHECK(emit_lp(m) == read_file(std::string(MOLMIP_GOLDEN_DIR) + "/simple.lp"));
  CHECK(emit_mps(m) == read_file(std::string(MOLMIP_GOLDEN_DIR) + "/simple.mps"));
}

TEST_CASE("empty model emits a header-only document") {
  MilpModel m;
  CHECK(emit_lp(m) == "\\ molmip model\nMinimize\n obj:\nSubject To\nBounds\nEnd\n");
}

TEST_CASE("build: variables, symmetry rows, and variant differences") {
  std::mt19937 rng(73);
  const auto sp = qm7_space(2);
  const auto gnn = tiny_model(rng, sp.feature_count());

  const auto bigm = build_milp(sp, gnn, MilpVariant::BigM, true);
  CHECK(bigm.index.count("X_0_0") == 1);
  CHECK(bigm.index.count("A_0_0") == 1);
  CHECK(bigm.index.count("A_0_1") == 1);
  CHECK(bigm.index.count("DB_0_1") == 1);
  CHECK(bigm.index.count("TB_0_1") == 1);
  // Gated copies for both directions of the only pair, every input channel.
  long long z_vars = 0;
  for (const auto& v : bigm.variables) z_vars += v.name.rfind("z_g", 0) == 0;
  CHECK(z_vars == 2 * sp.feature_count());
  CHECK(family_count(bigm, "C26") == sp.n - 1);
  CHECK(family_count(bigm, "C27") == 0);  // empty index range at n = 2
  CHECK(family_count(bigm, "zlink") == 4 * z_vars);
  CHECK_FALSE(bigm.has_quadratic());

  const auto plain = build_milp(sp, gnn, MilpVariant::BigM, false);
  CHECK(family_count(plain, "C26") == 0);
  CHECK(bigm.constraints.size() == plain.constraints.size() + (sp.n - 1));

  const auto bilinear = build_milp(sp, gnn, MilpVariant::Bilinear, true);
  CHECK(bilinear.has_quadratic());
  // Same variable set minus the gated copies.
  std::vector<std::string> big_names, bil_names;
  for (const auto& v : bigm.variables)
    if (v.name.rfind("z_g", 0) != 0) big_names.push_back(v.name);
  for (const auto& v : bilinear.variables) bil_names.push_back(v.name);
  CHECK(big_names == bil_names);

  const auto sp3 = qm7_space(3);
  const auto gnn3 = tiny_model(rng, sp3.feature_count());
  const auto sym3 = build_milp(sp3, gnn3, MilpVariant::BigM, true);
  CHECK(family_count(sym3, "C26") == 2);
  CHECK(family_count(sym3, "C27") == 1);

  CHECK_THROWS_AS(build_milp(sp, testutil::random_model(8, {2}, {1}, rng), MilpVariant::BigM, true),
                  std::domain_error);
}

TEST_CASE("emission is deterministic and meta form round-trips") {
  std::mt19937 rng(79);
  const auto sp = qm7_space(2);
  const auto gnn = tiny_model(rng, sp.feature_count());
  for (const auto variant : {MilpVariant::BigM, MilpVariant::Bilinear}) {
    const auto m = build_milp(sp, gnn, variant, true);
    CHECK(emit_lp(m) == emit_lp(m));
    const auto back = milp_from_json(milp_to_json(m));
    CHECK(milp_to_json(back) == milp_to_json(m));
    CHECK(emit_lp(back) == emit_lp(m));
    if (variant == MilpVariant::BigM) CHECK(emit_mps(back) == emit_mps(m));
  }
  const auto bil = build_milp(sp, gnn, MilpVariant::Bilinear, true);
  CHECK_THROWS_AS(emit_mps(bil), UnsupportedError);
}

TEST_CASE("corrupted meta content is rejected") {
  std::mt19937 rng(113);
  const auto sp = qm7_space(2);
  const auto m = build_milp(sp, tiny_model(rng, sp.feature_count()), MilpVariant::BigM, true);
  auto j = milp_to_json(m);
  j["objective"][0][0] = 99999;
  CHECK_THROWS_AS(milp_from_json(j), ParseError);
  auto j2 = milp_to_json(m);
  j2.erase("variables");
  CHECK_THROWS_AS(milp_from_json(j2), ParseError);
}

TEST_CASE("meta file round-trip on disk") {
  std::mt19937 rng(83);
  const auto sp = qm7_space(2);
  const auto m = build_milp(sp, tiny_model(rng, sp.feature_count()), MilpVariant::BigM, true);
  const std::string path = "test_meta_roundtrip.json";
  write_milp_meta(path, m);
  const auto back = read_milp_meta(path);
  CHECK(emit_lp(back) == emit_lp(m));
  std::remove(path.c_str());
}

TEST_CASE("embedded molecules satisfy both formulations") {
  std::mt19937 rng(89);
  const auto sp = qm7_space(2);
  const auto gnn = tiny_model(rng, sp.feature_count());
  const auto mols = feasible(sp, Level::S3);
  REQUIRE(mols.size() == 10);
  for (const auto variant : {MilpVariant::BigM, MilpVariant::Bilinear}) {
    const auto m = build_milp(sp, gnn, variant, true);
    for (const auto& mol : mols) {
      const auto a = embed_solution(m, sp, mol, gnn);
      const auto rep = check_assignment(m, a);
      CAPTURE(variant == MilpVariant::BigM, rep.max_residual, rep.max_integrality);
      REQUIRE(rep.pass);
      REQUIRE(std::fabs(a.at("dx_d1_0") - forward(gnn, mol)) <= 1e-9);
    }
  }
}

TEST_CASE("a flipped structure bit is caught with the family identified") {
  std::mt19937 rng(97);
  const auto sp = qm7_space(2);
  const auto gnn = tiny_model(rng, sp.feature_count());
  const auto m = build_milp(sp, gnn, MilpVariant::BigM, true);
  const auto mols = feasible(sp, Level::S3);
  auto a = embed_solution(m, sp, mols.front(), gnn);
  a["A_0_1"] = 0.0;  // drop the only bond
  const auto rep = check_assignment(m, a);
  CHECK_FALSE(rep.pass);
  bool degree_or_forced_bond = false;
  for (const auto& fam : rep.families)
    if ((fam.family == "C14" || fam.family == "C1" || fam.family == "C5") && fam.residual > 1e-6)
      degree_or_forced_bond = true;
  CHECK(degree_or_forced_bond);
}

TEST_CASE("infeasible molecules are rejected before embedding") {
  std::mt19937 rng(101);
  const auto sp = qm7_space(2);
  const auto gnn = tiny_model(rng, sp.feature_count());
  const auto m = build_milp(sp, gnn, MilpVariant::BigM, true);
  auto mol = Molecule::make(2, sp.feature_count());
  mol.set_bond(0, 1, true);
  // Oxygen with three hydrogens: the covalence balance fails.
  mol.x[0] = sp.feature_row(2, 1, 3, false, false);
  mol.x[1] = sp.feature_row(0, 1, 3, false, false);
  CHECK_THROWS_WITH(embed_solution(m, sp, mol, gnn), Catch::Matchers::ContainsSubstring("C21"));

  // A structure failing only the node-ordering rows is rejected only when the
  // symmetry rows are in the model.
  const auto mols1 = feasible(sp, Level::S1);
  const auto no_sym = build_milp(sp, gnn, MilpVariant::BigM, false);
  int rejected = 0, embedded = 0;
  for (const auto& mol1 : mols1) {
    CHECK_NOTHROW(embed_solution(no_sym, sp, mol1, gnn));
    try {
      embed_solution(m, sp, mol1, gnn);
      ++embedded;
    } catch (const std::domain_error&) {
      ++rejected;
    }
  }
  CHECK(embedded == 10);
  CHECK(rejected == 7);
}

TEST_CASE("solution files verify against the meta model") {
  std::mt19937 rng(103);
  const auto sp = qm7_space(2);
  const auto gnn = tiny_model(rng, sp.feature_count());
  const auto m = build_milp(sp, gnn, MilpVariant::BigM, true);
  const auto mols = feasible(sp, Level::S3);

  double best = 0;
  bool first = true;
  const std::string sol_path = "test_solution.sol";
  for (const auto& mol : mols) {
    const auto a = embed_solution(m, sp, mol, gnn);
    if (first || a.at("dx_d1_0") < best) best = a.at("dx_d1_0");
    first = false;
  }
  {
    // Round-trip the best embedding through the external solution format.
    const auto opt = brute_optimize(sp, gnn, Level::S3);
    const auto a = embed_solution(m, sp, opt.molecule, gnn);
    std::ofstream out(sol_path);
    out << "# objective value = " << detail::fmt_num(opt.value) << "\n";
    for (const auto& [name, value] : a) out << name << " " << detail::fmt_num(value) << "\n";
  }
  const auto back = read_solution_file(sol_path);
  const auto rep = check_assignment(m, back);
  CHECK(rep.pass);
  // The minimum embedded objective equals the exhaustive optimum exactly.
  CHECK(back.at("dx_d1_0") == brute_optimize(sp, gnn, Level::S3).value);
  CHECK(best == brute_optimize(sp, gnn, Level::S3).value);
  std::remove(sol_path.c_str());

  std::stringstream missing("X_0_0 1\n");
  const auto partial = read_solution(missing);
  CHECK_THROWS_AS(check_assignment(m, partial), std::domain_error);

  std::stringstream bad("X_0_0 not-a-number\n");
  CHECK_THROWS_AS(read_solution(bad), ParseError);
}
