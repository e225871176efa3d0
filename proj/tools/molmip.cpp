// molmip: counting, indexing, model emission, evaluation, brute-force
// optimization, and solution verification for molecular design spaces over
// trained graph networks.
//
// Exit codes: 0 success, 1 domain error / failed verification, 2 usage error,
// 3 time budget exceeded (partial results printed).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "molmip/enumerate.hpp"
#include "molmip/gnn.hpp"
#include "molmip/indexing.hpp"
#include "molmip/milp.hpp"
#include "molmip/selftest.hpp"

namespace {

molmip::DesignSpace make_space(const std::string& dataset, int n) {
  if (dataset == "qm7") return molmip::qm7_space(n);
  if (dataset == "qm9") return molmip::qm9_space(n);
  throw CLI::ValidationError("--dataset", "expected qm7 or qm9");
}

molmip::Level make_level(const std::string& level) {
  if (level == "s1") return molmip::Level::S1;
  if (level == "s2") return molmip::Level::S2;
  if (level == "s3") return molmip::Level::S3;
  throw CLI::ValidationError("--level", "expected s1, s2 or s3");
}

int env_threads() {
  if (const char* s = std::getenv("MOLMIP_THREADS")) {
    const int t = std::atoi(s);
    if (t > 0) return t;
  }
  return 0;
}

molmip::UndirectedGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw molmip::ParseError("cannot open fixture: " + path);
  return molmip::read_graph(in);
}

molmip::Molecule load_molecule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw molmip::ParseError("cannot open molecule file: " + path);
  return molmip::read_molecule(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimization over trained graph networks with symmetry breaking"};
  app.require_subcommand(1);
  int threads = env_threads();
  unsigned seed = 0;
  app.add_option("--threads,-t", threads, "worker threads (0 = hardware)");
  app.add_option("--seed", seed, "seed for randomized subcommands (reserved)");

  std::string dataset = "qm7", level_s = "s3", fixture, model_path, molecule_path, out_path;
  std::string constraints_s = "root,s3", variant_s = "bigm", symmetry_s = "on", format_s = "lp";
  std::string solution_path, emit_path;
  int n = 4, root = 0;
  double budget = 0;
  bool want_trace = false;

  CLI::App* cmd_count = app.add_subcommand("count", "count feasible structures");
  cmd_count->add_option("--dataset", dataset, "qm7 or qm9")->required();
  cmd_count->add_option("--n", n, "atom count")->required();
  cmd_count->add_option("--level", level_s, "s1, s2 or s3")->required();
  cmd_count->add_option("--budget", budget, "time budget in seconds (0 = unlimited)");
  cmd_count->add_option("--emit-structures", emit_path, "stream every structure to this file");

  CLI::App* cmd_ci = app.add_subcommand("count-indexings", "count labelings of a fixture graph");
  cmd_ci->add_option("--fixture", fixture, "graph fixture path")->required();
  cmd_ci->add_option("--root", root, "root node id");
  cmd_ci->add_option("--constraints", constraints_s,
                     "comma list of none,s1,root,s3 (default root,s3)");

  CLI::App* cmd_index = app.add_subcommand("index", "run the indexing construction");
  cmd_index->add_option("--fixture", fixture, "graph fixture path")->required();
  cmd_index->add_option("--root", root, "root node id");
  cmd_index->add_flag("--trace", want_trace, "print the per-iteration trace");

  CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a model on a molecule");
  cmd_eval->add_option("--model", model_path, "model weights (json)")->required();
  cmd_eval->add_option("--molecule", molecule_path, "molecule fixture")->required();

  CLI::App* cmd_opt = app.add_subcommand("brute-opt", "exhaustive optimization over a space");
  cmd_opt->add_option("--dataset", dataset, "qm7 or qm9")->required();
  cmd_opt->add_option("--n", n, "atom count")->required();
  cmd_opt->add_option("--level", level_s, "s1, s2 or s3")->required();
  cmd_opt->add_option("--model", model_path, "model weights (json)")->required();
  cmd_opt->add_option("-o,--output", out_path, "write the optimal molecule here");

  CLI::App* cmd_build = app.add_subcommand("build-milp", "emit the mixed-integer model");
  cmd_build->add_option("--dataset", dataset, "qm7 or qm9")->required();
  cmd_build->add_option("--n", n, "atom count")->required();
  cmd_build->add_option("--model", model_path, "model weights (json)")->required();
  cmd_build->add_option("--variant", variant_s, "bigm or bilinear");
  cmd_build->add_option("--symmetry", symmetry_s, "on or off");
  cmd_build->add_option("--format", format_s, "lp or mps");
  cmd_build->add_option("-o,--output", out_path, "output path")->required();

  CLI::App* cmd_verify = app.add_subcommand("verify", "check a solution file against a model");
  cmd_verify->add_option("--model-file", model_path, "model meta file (.meta)")->required();
  cmd_verify->add_option("--solution", solution_path, "solution file (name value lines)")
      ->required();

  CLI::App* cmd_selftest = app.add_subcommand("selftest", "run the built-in golden suite");

  // Global options (--threads, --seed) may appear after the subcommand.
  for (CLI::App* sub : {cmd_count, cmd_ci, cmd_index, cmd_eval, cmd_opt, cmd_build, cmd_verify,
                        cmd_selftest})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_count->parsed()) {
      const auto sp = make_space(dataset, n);
      const auto level = make_level(level_s);
      if (!emit_path.empty()) {
        std::ofstream out(emit_path);
        if (!out) throw std::runtime_error("cannot write " + emit_path);
        long long streamed = 0;
        molmip::for_each_feasible(sp, level, [&](const molmip::Molecule& mol) {
          if (streamed++) out << '\n';
          molmip::write_molecule(out, mol);
          return true;
        });
        std::cout << "dataset=" << dataset << "\nn=" << n << "\nlevel=" << level_s
                  << "\ncount=" << streamed << "\nexact=true\n";
        return 0;
      }
      molmip::EnumOptions opts;
      opts.threads = threads;
      opts.budget_seconds = budget;
      const auto res = molmip::count_feasible(sp, level, opts);
      std::cout << "dataset=" << dataset << "\nn=" << n << "\nlevel=" << level_s
                << "\ncount=" << res.count << "\nexact=" << (res.exact ? "true" : "false") << "\n";
      return res.exact ? 0 : 3;
    }

    if (cmd_ci->parsed()) {
      const auto g = load_graph(fixture);
      molmip::IndexingConstraints c;
      std::stringstream ss(constraints_s);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        if (tok == "none" || tok.empty()) continue;
        else if (tok == "s1") c.s1 = true;
        else if (tok == "root") c.fixed_root = true;
        else if (tok == "s3") c.s3 = true;
        else throw CLI::ValidationError("--constraints", "unknown token '" + tok + "'");
      }
      std::cout << "count=" << molmip::count_indexings(g, c, root) << "\n";
      return 0;
    }

    if (cmd_index->parsed()) {
      const auto g = load_graph(fixture);
      const auto [idx, trace] = molmip::index_graph(g, root);
      for (int v = 0; v < g.n; ++v) std::cout << "I_" << v << "=" << idx.index_of[v] << "\n";
      if (want_trace) {
        for (const auto& it : trace.iterations) {
          std::cout << "s=" << it.s << " chosen=" << it.chosen << " temp=";
          for (int v = 0; v < g.n; ++v) std::cout << (v ? "," : "") << it.temp_index[v];
          std::cout << "\n";
        }
      }
      return 0;
    }

    if (cmd_eval->parsed()) {
      const auto model = molmip::load_model(model_path);
      const auto mol = load_molecule(molecule_path);
      std::cout << "value=" << molmip::detail::fmt_num(molmip::forward(model, mol)) << "\n";
      return 0;
    }

    if (cmd_opt->parsed()) {
      const auto sp = make_space(dataset, n);
      const auto model = molmip::load_model(model_path);
      const auto best = molmip::brute_optimize(sp, model, make_level(level_s));
      std::cout << "value=" << molmip::detail::fmt_num(best.value) << "\n";
      if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        molmip::write_molecule(out, best.molecule);
        std::cout << "molecule=" << out_path << "\n";
      } else {
        molmip::write_molecule(std::cout, best.molecule);
      }
      return 0;
    }

    if (cmd_build->parsed()) {
      const auto sp = make_space(dataset, n);
      const auto model = molmip::load_model(model_path);
      const auto variant = variant_s == "bilinear" ? molmip::MilpVariant::Bilinear
                                                   : molmip::MilpVariant::BigM;
      if (variant_s != "bilinear" && variant_s != "bigm")
        throw CLI::ValidationError("--variant", "expected bigm or bilinear");
      if (symmetry_s != "on" && symmetry_s != "off")
        throw CLI::ValidationError("--symmetry", "expected on or off");
      const auto milp = molmip::build_milp(sp, model, variant, symmetry_s == "on");
      std::ofstream out(out_path);
      if (!out) throw std::runtime_error("cannot write " + out_path);
      if (format_s == "lp") out << molmip::emit_lp(milp);
      else if (format_s == "mps") out << molmip::emit_mps(milp);
      else throw CLI::ValidationError("--format", "expected lp or mps");
      const std::string meta = out_path + ".meta";
      molmip::write_milp_meta(meta, milp);
      std::cout << "variables=" << milp.variables.size()
                << "\nconstraints=" << milp.constraints.size() << "\noutput=" << out_path
                << "\nmeta=" << meta << "\n";
      return 0;
    }

    if (cmd_verify->parsed()) {
      const auto milp = molmip::read_milp_meta(model_path);
      const auto assignment = molmip::read_solution_file(solution_path);
      const auto rep = molmip::check_assignment(milp, assignment);
      for (const auto& fam : rep.families)
        std::cout << "residual." << fam.family << "=" << molmip::detail::fmt_num(fam.residual)
                  << (fam.residual > 0 ? " worst=" + fam.worst : "") << "\n";
      std::cout << "max_residual=" << molmip::detail::fmt_num(rep.max_residual)
                << "\nmax_integrality=" << molmip::detail::fmt_num(rep.max_integrality)
                << "\npass=" << (rep.pass ? "true" : "false") << "\n";
      return rep.pass ? 0 : 1;
    }

    if (cmd_selftest->parsed()) {
      const std::string report = molmip::run_selftest(threads);
      std::cout << report;
      return report.ends_with("selftest=pass\n") ? 0 : 1;
    }
  } catch (const CLI::Error& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
