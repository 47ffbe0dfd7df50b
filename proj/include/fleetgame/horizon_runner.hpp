#pragma once

// Open-loop and receding-horizon deployment of the equilibrium solver over a
// full time frame, propagating the realized fleet states between solves.

#include "fleetgame/ne_solver.hpp"

#include <string>

namespace fleetgame {

/// What happened in one interval of the frame.
struct IntervalRecord {
  Index k = 0;
  Vector x_a, x_b;  ///< states at the start of the interval
  Vector u_a, u_b;  ///< applied dispatches
  double phi_a = 0.0, phi_b = 0.0;
  double beta = 0.0;
  double revenue_a = 0.0, revenue_b = 0.0;
  double cost_a = 0.0, cost_b = 0.0;
  double forfeited = 0.0;
  double cum_profit_a = 0.0, cum_profit_b = 0.0;
  double cum_lost = 0.0;

  double profit_a() const { return revenue_a - cost_a; }
  double profit_b() const { return revenue_b - cost_b; }
};

/// Diagnostics of one equilibrium solve.
struct SolveRecord {
  Index start = 0;           ///< first interval covered by the window
  Index horizon = 0;
  Index window_offset = 0;   ///< absolute offset reported by the window itself
  Vector window_beta;        ///< exogenous values the solve actually saw
  Vector window_epsilon;
  Matrix window_q;
  Index applied = 0;         ///< how many of the planned inputs were applied
  double delta_a = 0.0, delta_b = 0.0;
  double step_used = 0.0;
  int outer_passes = 0;
  int inner_iterations = 0;  ///< summed over outer passes
  bool converged = false;
};

struct TrajectoryLog {
  Index total_frame = 0;
  Index horizon = 0;
  std::vector<IntervalRecord> intervals;
  std::vector<SolveRecord> solves;
  Vector final_state_a, final_state_b;
  /// The last solve's full plan; for open-loop runs this is the equilibrium.
  std::optional<JointStrategy> last_plan;

  double total_profit_a() const { return intervals.empty() ? 0.0 : intervals.back().cum_profit_a; }
  double total_profit_b() const { return intervals.empty() ? 0.0 : intervals.back().cum_profit_b; }
  double total_lost() const { return intervals.empty() ? 0.0 : intervals.back().cum_lost; }
};

/// A solve inside a horizon run did not certify; carries the log so far.
class HorizonSolveError : public ConvergenceError {
 public:
  HorizonSolveError(const std::string& what, TrajectoryLog partial)
      : ConvergenceError(what), partial_(std::move(partial)) {}
  const TrajectoryLog& partial_log() const noexcept { return partial_; }

 private:
  TrajectoryLog partial_;
};

struct RunOptions {
  SolveOptions solve;
  /// Start each solve from the previous plan shifted by one interval.
  bool shifted_warm_start = false;
};

namespace detail {

/// Clips a planned dispatch to the realized stock; only rounding-level
/// corrections happen here because the model is exact.
inline Vector admissible_control(const Vector& u, const Vector& x) { return u.cwiseMax(0.0).cwiseMin(x); }

inline Vector clean_state(Vector x, double fleet_size) {
  for (Index j = 0; j < x.size(); ++j)
    if (x[j] < 0.0 && x[j] > -1e-9 * std::max(1.0, fleet_size)) x[j] = 0.0;
  return x;
}

inline Strategy shifted_plan(const Strategy& plan, const StrategyPolytope& poly, const StateMatrices& mats,
                             const Vector& x0) {
  const Index T = poly.horizon, m = poly.num_categories;
  Strategy s;
  s.u = Matrix::Zero(T, m);
  const Index keep = std::min<Index>(T, plan.horizon() - 1);
  if (keep > 0) s.u.topRows(keep) = plan.u.middleRows(1, keep);
  s.phi = operating_counts(mats, x0, s.u);
  return Strategy::from_flat(project(poly, s.flatten()).point, T, m);
}

}  // namespace detail

/// Receding-horizon deployment: T_total - T + 1 solves; the first
/// T_total - T apply only u[0], the last applies its whole plan.
inline TrajectoryLog run_receding_horizon(const FleetParams& fleet_a, const FleetParams& fleet_b,
                                          const ScenarioProfile& scenario, Index horizon,
                                          const SolverConfig& config, const RunOptions& options = {}) {
  const Index total = scenario.length();
  require(horizon >= 1 && horizon <= total, "horizon",
          "must lie in [1, " + std::to_string(total) + "], got " + std::to_string(horizon));
  fleet_a.validate("companies.a");
  fleet_b.validate("companies.b");
  config.validate();

  const StateMatrices mats_a = build_state_matrices(fleet_a);
  const StateMatrices mats_b = build_state_matrices(fleet_b);

  TrajectoryLog log;
  log.total_frame = total;
  log.horizon = horizon;
  Vector x_a = fleet_a.initial_state, x_b = fleet_b.initial_state;
  double cum_a = 0.0, cum_b = 0.0, cum_lost = 0.0;
  std::optional<JointStrategy> previous;

  const Index n_total = total - horizon + 1;
  for (Index s = 0; s < n_total; ++s) {
    FleetParams fa = fleet_a, fb = fleet_b;
    fa.initial_state = x_a;
    fb.initial_state = x_b;
    const ScenarioProfile window = scenario.window(s, horizon);
    const Game game = make_game(fa, fb, window);

    SolveOptions solve_opts = options.solve;
    if (options.shifted_warm_start && previous) {
      solve_opts.start = JointStrategy{detail::shifted_plan(previous->a, game.poly_a, mats_a, x_a),
                                       detail::shifted_plan(previous->b, game.poly_b, mats_b, x_b)};
    }
    const SolveReport rep = solve_ne(game, config, solve_opts);

    const bool last = s == n_total - 1;
    SolveRecord rec;
    rec.start = s;
    rec.horizon = horizon;
    rec.window_offset = window.offset;
    rec.window_beta = window.beta;
    rec.window_epsilon = window.epsilon;
    rec.window_q = window.q;
    rec.applied = last ? horizon : 1;
    rec.delta_a = rep.delta_a;
    rec.delta_b = rep.delta_b;
    rec.step_used = rep.step_used;
    rec.outer_passes = rep.outer_passes;
    for (int it : rep.inner_iterations) rec.inner_iterations += it;
    rec.converged = rep.converged;
    log.solves.push_back(rec);

    if (!rep.converged) {
      log.final_state_a = x_a;
      log.final_state_b = x_b;
      throw HorizonSolveError("solve at interval " + std::to_string(s) + " did not certify (delta_a + delta_b = " +
                                  std::to_string(rep.delta()) + ")",
                              log);
    }

    for (Index i = 0; i < rec.applied; ++i) {
      const Index k = s + i;
      IntervalRecord iv;
      iv.k = k;
      iv.x_a = x_a;
      iv.x_b = x_b;
      iv.u_a = detail::admissible_control(rep.joint.a.u.row(i).transpose(), x_a);
      iv.u_b = detail::admissible_control(rep.joint.b.u.row(i).transpose(), x_b);
      iv.phi_a = mats_a.serving.dot(x_a - iv.u_a);
      iv.phi_b = mats_b.serving.dot(x_b - iv.u_b);
      iv.beta = scenario.beta[k];
      const IntervalShares sh = interval_shares(iv.phi_a, iv.phi_b, scenario.beta[k], scenario.epsilon[k]);
      iv.revenue_a = sh.revenue_a;
      iv.revenue_b = sh.revenue_b;
      iv.forfeited = sh.forfeited;
      iv.cost_a = charging_cost(iv.u_a, iv.u_b, scenario.q.row(k));
      iv.cost_b = charging_cost(iv.u_b, iv.u_a, scenario.q.row(k));
      cum_a += iv.profit_a();
      cum_b += iv.profit_b();
      cum_lost += iv.forfeited;
      iv.cum_profit_a = cum_a;
      iv.cum_profit_b = cum_b;
      iv.cum_lost = cum_lost;

      x_a = detail::clean_state(mats_a.A * x_a + mats_a.B * iv.u_a, fleet_a.fleet_size);
      x_b = detail::clean_state(mats_b.A * x_b + mats_b.B * iv.u_b, fleet_b.fleet_size);
      log.intervals.push_back(std::move(iv));
    }
    previous = rep.joint;
  }
  log.final_state_a = x_a;
  log.final_state_b = x_b;
  log.last_plan = previous;
  return log;
}

/// One solve over the whole frame, every planned input applied.
inline TrajectoryLog plan_open_loop(const FleetParams& fleet_a, const FleetParams& fleet_b,
                                    const ScenarioProfile& scenario, const SolverConfig& config,
                                    const RunOptions& options = {}) {
  return run_receding_horizon(fleet_a, fleet_b, scenario, scenario.length(), config, options);
}

}  // namespace fleetgame
