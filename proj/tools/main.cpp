// Command-line front end: run one scenario, drive a verification suite, or
// dump the CSV traces of a scenario.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "finsler/harness.hpp"

namespace {

finsler::Scenario load_scenario(const std::string& arg) {
  if (std::filesystem::exists(arg)) return finsler::parse_scenario_file(arg);
  return finsler::builtin_scenario(arg);
}

void apply_overrides(finsler::Scenario& sc, int mesh, double ode_tol, double rank_tol,
                     std::uint64_t seed) {
  if (mesh > 0) sc.mesh_N = mesh;
  if (ode_tol > 0) {
    sc.ode.rtol = ode_tol;
    sc.ode.atol = ode_tol * 1e-2;
  }
  if (rank_tol > 0) sc.rank_tol = rank_tol;
  if (seed) sc.seed = seed;
}

void print_report(const finsler::Report& rep) {
  std::cout << "scenario " << rep.scenario << "  (dim " << rep.dim << ", tau " << rep.tau
            << ", L0 " << rep.L0 << ")\n";
  std::cout << "  focal:";
  if (rep.focal.empty()) std::cout << " none";
  for (const auto& f : rep.focal)
    std::cout << " (t=" << f.t << ", mu=" << f.multiplicity << (f.certain ? "" : ", uncertain")
              << ")";
  std::cout << "\n  indices: spectral=" << rep.spectral_index << " focal_sum=" << rep.focal_sum
            << " broken=" << rep.broken_index;
  if (rep.has_Q) std::cout << " spectral_PQ=" << rep.pq_index << " A=" << rep.A_index;
  std::cout << "\n  nullities: spectral=" << rep.spectral_nullity
            << " broken=" << rep.broken_nullity << " kernel_dim=" << rep.kernel_dim_tau;
  if (rep.has_Q) std::cout << " spectral_PQ=" << rep.pq_nullity << " A=" << rep.A_nullity;
  std::cout << "\n";
  for (const auto& a : rep.assertions) {
    std::cout << "  [" << (a.pass ? "ok" : "FAIL") << "] " << a.name << "  lhs=" << a.lhs
              << " rhs=" << a.rhs;
    if (a.tol > 0) std::cout << " tol=" << a.tol;
    std::cout << "\n";
  }
  std::cout << (rep.pass ? "PASS" : "FAIL") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conic pseudo-Finsler Morse index verification"};
  app.require_subcommand(1);

  std::string config, suite, out_dir;
  int mesh = 0;
  double ode_tol = 0.0, rank_tol = 0.0;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--mesh", mesh, "interior mesh nodes for the discretized form");
    cmd->add_option("--ode-tol", ode_tol, "relative ODE tolerance (absolute = 1e-2 of it)");
    cmd->add_option("--rank-tol", rank_tol, "relative singular-value rank tolerance");
    cmd->add_option("--seed", seed, "seed override for randomized families");
    cmd->add_option("--out", out_dir, "directory for reports and traces");
  };

  CLI::App* run = app.add_subcommand("run", "run one scenario and verify the index equalities");
  run->add_option("config", config, "scenario file or built-in name")->required();
  add_common(run);

  CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("suite", suite, "one of: symmetry ms1-deterministic ms1-random ms2-random propB index-lemma exp-jacobi kropina")
      ->required();
  add_common(verify);

  CLI::App* trace = app.add_subcommand("trace", "emit CSV traces for a scenario");
  trace->add_option("config", config, "scenario file or built-in name")->required();
  add_common(trace);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      finsler::Scenario sc = load_scenario(config);
      apply_overrides(sc, mesh, ode_tol, rank_tol, seed);
      finsler::RunOptions ro;
      ro.out_dir = out_dir;
      if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
      const finsler::Report rep = finsler::run_scenario(sc, ro);
      print_report(rep);
      return rep.pass ? 0 : 1;
    }
    if (verify->parsed()) {
      if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
      const finsler::SuiteReport rep = finsler::verify_suite(suite, seed, out_dir);
      std::cout << "suite " << rep.suite << ": " << rep.passed() << "/" << rep.total()
                << " cases passed\n";
      for (const auto& c : rep.cases)
        if (!c.pass) std::cout << "  [FAIL] " << c.name << "  " << c.detail << "\n";
      return rep.pass() ? 0 : 1;
    }
    if (trace->parsed()) {
      finsler::Scenario sc = load_scenario(config);
      apply_overrides(sc, mesh, ode_tol, rank_tol, seed);
      finsler::RunOptions ro;
      ro.out_dir = out_dir.empty() ? "." : out_dir;
      std::filesystem::create_directories(ro.out_dir);
      ro.mesh_stability = false;
      const finsler::Report rep = finsler::run_scenario(sc, ro);
      std::cout << "traces written to " << ro.out_dir << "\n";
      return rep.pass ? 0 : 1;
    }
  } catch (const finsler::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
