// fleetgame: equilibrium charging schedules for two competing EV fleets.
//
//   fleetgame plan          --scenario S --out DIR
//   fleetgame mpc           --scenario S --horizon T --out DIR
//   fleetgame verify        --scenario S --solution DIR/solution.json
//   fleetgame sweep-horizon --scenario S --horizons 3,6,9 --out DIR
//
// Exit codes: 0 success, 2 invalid input, 3 solver did not certify,
// 4 verification failed, 1 anything else.

#include "fleetgame/manifest.hpp"
#include "fleetgame/oracle.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace fleetgame;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitVerifyFail = 4;

struct CommonArgs {
  std::string scenario;
  std::string out = "out";
  std::optional<double> tol, gamma_bar, eta;
  std::optional<std::uint64_t> seed;
  bool warm_start = false;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out) {
  cmd->add_option("--scenario", args.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  if (with_out) cmd->add_option("--out", args.out, "Output directory")->capture_default_str();
  cmd->add_option("--tol", args.tol, "Certificate threshold on delta_a + delta_b");
  cmd->add_option("--gamma-bar", args.gamma_bar, "Initial step size");
  cmd->add_option("--eta", args.eta, "Step shrink factor in (0, 1)");
  cmd->add_option("--seed", args.seed, "Start every solve from a random feasible point drawn with this seed");
  cmd->add_flag("--warm-start", args.warm_start,
                "Resume outer passes from the last iterate and seed receding solves with the shifted plan");
  cmd->add_flag("--verbose", args.verbose, "Print per-solve diagnostics");
}

struct Loaded {
  Scenario scenario;
  std::string bytes;
  SolverConfig config;
  RunOptions run;
};

Loaded load(const CommonArgs& args) {
  Loaded l;
  l.bytes = io_detail::read_file(args.scenario, "scenario");
  l.scenario = parse_scenario_text(l.bytes);
  l.config = l.scenario.solver;
  if (args.tol) l.config.tol = *args.tol;
  if (args.gamma_bar) l.config.gamma_bar = *args.gamma_bar;
  if (args.eta) l.config.eta = *args.eta;
  if (args.warm_start) l.config.warm_start = true;
  l.config.validate();
  l.run.shifted_warm_start = args.warm_start;
  if (args.seed) {
    l.run.solve.init = InitKind::random;
    l.run.solve.seed = *args.seed;
  }
  return l;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

template <typename F>
void write_with(const fs::path& path, F&& writer) {
  std::ostringstream ss;
  writer(ss);
  write_text(path, ss.str());
}

void report_solves(const TrajectoryLog& log) {
  for (const SolveRecord& s : log.solves)
    std::cerr << "solve k=" << s.start << " T=" << s.horizon << " delta=" << fmt17(s.delta_a + s.delta_b)
              << " step=" << fmt17(s.step_used) << " outer=" << s.outer_passes
              << " inner=" << s.inner_iterations << (s.converged ? "" : " NOT CERTIFIED") << '\n';
}

/// Writes every output of a horizon run into `dir`.
void write_run(const fs::path& dir, const TrajectoryLog& log, Json manifest, bool complete) {
  fs::create_directories(dir);
  write_with(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, log); });
  write_with(dir / "solves.csv", [&](std::ostream& o) { write_solves_csv(o, log); });
  if (complete) {
    write_with(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, {summarize(log)}); });
    write_text(dir / "solution.json", solution_to_json(final_solution(log)).dump(2) + "\n");
  }
  manifest["status"] = complete ? "ok" : "not_certified";
  manifest["diagnostics"] = diagnostics_json(log);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

int run_horizon(const std::string& command, const CommonArgs& args, std::optional<Index> horizon) {
  const Loaded l = load(args);
  const Index T = horizon.value_or(command == "plan" ? l.scenario.total_frame : l.scenario.horizon);
  Json manifest = make_manifest(command, args.scenario, l.bytes, l.config);
  manifest["horizon"] = T;
  try {
    const TrajectoryLog log =
        run_receding_horizon(l.scenario.fleet_a, l.scenario.fleet_b, l.scenario.profile, T, l.config, l.run);
    if (args.verbose) report_solves(log);
    write_run(args.out, log, manifest, true);
    std::cout << "horizon " << T << ": profit_a " << fmt17(log.total_profit_a()) << ", profit_b "
              << fmt17(log.total_profit_b()) << ", lost " << fmt17(log.total_lost()) << " (" << log.solves.size()
              << " solves)\n";
    return 0;
  } catch (const HorizonSolveError& e) {
    if (args.verbose) report_solves(e.partial_log());
    write_run(args.out, e.partial_log(), manifest, false);
    std::cerr << "error: " << e.what() << "; partial outputs in " << args.out << '\n';
    return kExitNoConvergence;
  }
}

int run_sweep(const CommonArgs& args, const std::vector<Index>& horizons) {
  const Loaded l = load(args);
  std::vector<SummaryRow> rows;
  Json manifest = make_manifest("sweep-horizon", args.scenario, l.bytes, l.config);
  Json runs = Json::array();
  int status = 0;
  for (Index T : horizons) {
    const fs::path dir = fs::path(args.out) / ("T" + std::to_string(T));
    Json sub = make_manifest("mpc", args.scenario, l.bytes, l.config);
    sub["horizon"] = T;
    try {
      const TrajectoryLog log =
          run_receding_horizon(l.scenario.fleet_a, l.scenario.fleet_b, l.scenario.profile, T, l.config, l.run);
      if (args.verbose) report_solves(log);
      write_run(dir, log, sub, true);
      rows.push_back(summarize(log));
      runs.push_back(diagnostics_json(log));
    } catch (const HorizonSolveError& e) {
      write_run(dir, e.partial_log(), sub, false);
      std::cerr << "error: horizon " << T << ": " << e.what() << '\n';
      status = kExitNoConvergence;
    }
  }
  fs::create_directories(args.out);
  write_with(fs::path(args.out) / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, rows); });
  manifest["horizons"] = horizons;
  manifest["runs"] = runs;
  manifest["status"] = status == 0 ? "ok" : "not_certified";
  write_text(fs::path(args.out) / "manifest.json", manifest.dump(2) + "\n");
  write_summary_csv(std::cout, rows);
  return status;
}

int run_verify(const CommonArgs& args, const std::string& solution_path, std::optional<double> improvement_tol) {
  const Loaded l = load(args);
  const Index m = l.scenario.fleet_a.num_categories;
  const SolutionFile sol = load_solution(solution_path, m);
  const Index T = sol.joint.a.horizon();
  require(sol.window_start + T <= l.scenario.total_frame, "solution.horizon", "window runs past the scenario frame");

  FleetParams fa = l.scenario.fleet_a, fb = l.scenario.fleet_b;
  fa.initial_state = sol.initial_state_a;
  fb.initial_state = sol.initial_state_b;
  fa.validate("solution.initial_state_a");
  fb.validate("solution.initial_state_b");
  const ScenarioProfile window = l.scenario.profile.window(sol.window_start, T);

  VerifyOptions opts;
  opts.mode = VerifyMode::sampling;
  opts.improvement_tol = improvement_tol;
  if (args.seed) opts.seed = *args.seed;
  const VerifyVerdict v = verify_equilibrium(sol.joint, fa, fb, window, opts);

  Json out;
  out["verdict"] = v.pass ? "PASS" : "FAIL";
  out["improvement_a"] = v.improvement_a;
  out["improvement_b"] = v.improvement_b;
  out["threshold_a"] = v.threshold_a;
  out["threshold_b"] = v.threshold_b;
  out["profit_a"] = v.profit_a;
  out["profit_b"] = v.profit_b;
  std::cout << out.dump(2) << '\n';
  return v.pass ? 0 : kExitVerifyFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nash-equilibrium charging schedules for two competing electric ride-hailing fleets"};
  app.require_subcommand(1);

  CommonArgs plan_args, mpc_args, verify_args, sweep_args;
  std::optional<Index> mpc_horizon;
  std::string solution_path;
  std::optional<double> improvement_tol;
  std::vector<Index> horizons{3, 6, 9};

  auto* plan = app.add_subcommand("plan", "Open-loop equilibrium over the whole frame");
  add_common(plan, plan_args, true);

  auto* mpc = app.add_subcommand("mpc", "Receding-horizon deployment");
  add_common(mpc, mpc_args, true);
  mpc->add_option("--horizon", mpc_horizon, "Planning horizon T (scenario value when omitted)");

  auto* verify = app.add_subcommand("verify", "Check a saved joint plan for profitable unilateral deviations");
  add_common(verify, verify_args, false);
  verify->add_option("--solution", solution_path, "solution.json written by plan or mpc")
      ->required()
      ->check(CLI::ExistingFile);
  verify->add_option("--improvement-tol", improvement_tol, "Absolute threshold (default 1e-3 x the deviating company's profit)");

  auto* sweep = app.add_subcommand("sweep-horizon", "Receding-horizon runs for several horizons");
  add_common(sweep, sweep_args, true);
  sweep->add_option("--horizons", horizons, "Horizons to run")->delimiter(',')->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*plan) return run_horizon("plan", plan_args, std::nullopt);
    if (*mpc) return run_horizon("mpc", mpc_args, mpc_horizon);
    if (*verify) return run_verify(verify_args, solution_path, improvement_tol);
    if (*sweep) return run_sweep(sweep_args, horizons);
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
