#pragma once

// Semi-decentralized projected-pseudogradient iteration with step-size
// shrinkage and a KKT-residual certificate on the outer loop.

#include "fleetgame/convex_kernel.hpp"
#include "fleetgame/payoff.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <tuple>

namespace fleetgame {

struct SolverConfig {
  double gamma_bar = 0.05;  ///< initial step size
  double eta = 0.5;         ///< step shrink factor per outer pass
  double tol = 0.01;        ///< certificate threshold on delta_a + delta_b
  int maxiter = 20000;      ///< inner-loop cap per outer pass
  int max_outer = 40;       ///< number of step-size shrinks before giving up
  /// Inner-loop stop on ||Z^{t+1} - Z^t||; `tol` when unset.
  std::optional<double> inner_tol;
  bool warm_start = false;  ///< resume each outer pass from the last iterate instead of Z^0
  double activity_tol = 1e-6;

  double inner_threshold() const { return inner_tol.value_or(tol); }
  /// Threshold below which a single delta counts as zero.
  double residual_tol() const { return tol / 10.0; }

  void validate() const {
    require(gamma_bar > 0.0, "solver.gamma_bar", "must be positive");
    require(eta > 0.0 && eta < 1.0, "solver.eta", "must lie in (0, 1)");
    require(tol > 0.0, "solver.tol", "must be positive");
    require(maxiter >= 1, "solver.maxiter", "must be at least 1");
    require(max_outer >= 1, "solver.max_outer", "must be at least 1");
    require(!inner_tol || *inner_tol > 0.0, "solver.inner_tol", "must be positive");
    require(activity_tol > 0.0, "solver.activity_tol", "must be positive");
  }
};

/// Both companies' model for one planning window.
struct Game {
  FleetParams fleet_a;
  FleetParams fleet_b;
  ScenarioProfile window;
  StateMatrices mats_a;
  StateMatrices mats_b;
  StrategyPolytope poly_a;
  StrategyPolytope poly_b;

  Index horizon() const { return poly_a.horizon; }
  Index num_categories() const { return poly_a.num_categories; }
  const FleetParams& fleet(Company c) const { return c == Company::a ? fleet_a : fleet_b; }
  const StrategyPolytope& polytope(Company c) const { return c == Company::a ? poly_a : poly_b; }
  const StateMatrices& matrices(Company c) const { return c == Company::a ? mats_a : mats_b; }
};

inline Game make_game(const FleetParams& fleet_a, const FleetParams& fleet_b, const ScenarioProfile& window) {
  fleet_a.validate("companies.a");
  fleet_b.validate("companies.b");
  require(fleet_a.num_categories == fleet_b.num_categories, "num_categories",
          "both companies must use the same battery categories");
  require(window.num_categories() == fleet_a.num_categories, "profiles.q",
          "needs one column per battery category");
  const Index T = window.length();
  Game g{fleet_a, fleet_b, window, build_state_matrices(fleet_a), build_state_matrices(fleet_b), {}, {}};
  g.poly_a = build_company_polytope(fleet_a, T);
  g.poly_b = build_company_polytope(fleet_b, T);
  return g;
}

/// Zero-dispatch starting strategy.
inline Strategy initialize(const StrategyPolytope& poly, const Vector& x0) {
  (void)x0;  // the polytope already encodes x0 through r_eq
  return Strategy::from_flat(poly.reference_point(), poly.horizon, poly.num_categories);
}

/// Projection of a uniform random point of [0, fleet_size]^n.
inline Strategy initialize_random(const StrategyPolytope& poly, double fleet_size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, fleet_size);
  Vector q(poly.dimension());
  for (Index i = 0; i < q.size(); ++i) q[i] = dist(rng);
  return Strategy::from_flat(project(poly, q).point, poly.horizon, poly.num_categories);
}

/// Per-company flat iterate plus the projection working set that produced it.
struct PlayerIterate {
  Vector z;
  std::vector<Index> working;
};

struct JointIterate {
  PlayerIterate a;
  PlayerIterate b;

  JointStrategy to_strategy(Index T, Index m) const {
    return {Strategy::from_flat(a.z, T, m), Strategy::from_flat(b.z, T, m)};
  }
};

namespace detail {

inline PlayerIterate projected_ascent_step(const StrategyPolytope& poly, const PlayerIterate& self,
                                           const Vector& rival, const ScenarioProfile& window, double gamma) {
  const Index T = poly.horizon, m = poly.num_categories;
  const Vector grad = profit_gradient_flat(self.z, rival, window, T, m);
  ProjectionOptions opts;
  opts.start = self.z;
  opts.working_set = self.working;
  ProjectionResult res = project(poly, self.z + gamma * grad, opts);
  return {std::move(res.point), std::move(res.working_set)};
}

}  // namespace detail

/// Z_i <- Proj_i[Z_i + gamma grad_i J_i(Z_i, Z_-i)] for both companies, each
/// reading only the previous joint iterate.
inline JointIterate fixed_point_sweep(const JointIterate& joint, const StrategyPolytope& poly_a,
                                      const StrategyPolytope& poly_b, const ScenarioProfile& window,
                                      double gamma) {
  require(gamma >= 0.0, "gamma", "must be non-negative");
  return {detail::projected_ascent_step(poly_a, joint.a, joint.b.z, window, gamma),
          detail::projected_ascent_step(poly_b, joint.b, joint.a.z, window, gamma)};
}

inline JointStrategy fixed_point_sweep(const JointStrategy& joint, const StrategyPolytope& poly_a,
                                       const StrategyPolytope& poly_b, const ScenarioProfile& window,
                                       double gamma) {
  const JointIterate it{{joint.a.flatten(), {}}, {joint.b.flatten(), {}}};
  return fixed_point_sweep(it, poly_a, poly_b, window, gamma).to_strategy(poly_a.horizon, poly_a.num_categories);
}

/// delta_i of company `c` at the joint point.
inline ResidualReport certificate(const Game& game, Company c, const Vector& z_self, const Vector& z_rival,
                                  double activity_tol = 1e-6) {
  const Vector grad = profit_gradient_flat(z_self, z_rival, game.window, game.horizon(), game.num_categories());
  return stationarity_residual(game.polytope(c), z_self, grad, activity_tol);
}

struct SolveReport {
  JointStrategy joint;
  double delta_a = 0.0;
  double delta_b = 0.0;
  double step_used = 0.0;
  std::vector<int> inner_iterations;  ///< one entry per outer pass
  int outer_passes = 0;
  bool converged = false;
  double profit_a = 0.0;
  double profit_b = 0.0;

  double delta() const { return delta_a + delta_b; }
};

enum class InitKind { zero_dispatch, random };

struct SolveOptions {
  InitKind init = InitKind::zero_dispatch;
  std::uint64_t seed = 0;
  /// Explicit starting point; overrides `init` when set.
  std::optional<JointStrategy> start;
  /// Called with every inner iterate (both companies), for instrumentation.
  std::function<void(const JointIterate&)> on_iterate;
};

inline SolveReport solve_ne(const Game& game, const SolverConfig& config, const SolveOptions& options = {}) {
  config.validate();
  const Index T = game.horizon(), m = game.num_categories();

  JointIterate z0;
  if (options.start) {
    require(game.poly_a.contains(options.start->a.flatten()) && game.poly_b.contains(options.start->b.flatten()),
            "start", "initial strategies must be feasible");
    z0 = {{options.start->a.flatten(), {}}, {options.start->b.flatten(), {}}};
  } else if (options.init == InitKind::random) {
    std::mt19937_64 rng(options.seed);
    z0.a.z = initialize_random(game.poly_a, game.fleet_a.fleet_size, rng).flatten();
    z0.b.z = initialize_random(game.poly_b, game.fleet_b.fleet_size, rng).flatten();
  } else {
    z0.a.z = initialize(game.poly_a, game.fleet_a.initial_state).flatten();
    z0.b.z = initialize(game.poly_b, game.fleet_b.initial_state).flatten();
  }

  auto certify = [&](const JointIterate& z) {
    return std::pair{certificate(game, Company::a, z.a.z, z.b.z, config.activity_tol).delta,
                     certificate(game, Company::b, z.b.z, z.a.z, config.activity_tol).delta};
  };

  SolveReport report;
  JointIterate current = z0;
  auto [da, db] = certify(current);
  JointIterate best = current;
  double best_delta = da + db;
  const double inner_tol = config.inner_threshold();

  int l = 0;
  while (da + db > config.tol && l < config.max_outer) {
    const double gamma = std::pow(config.eta, l) * config.gamma_bar;
    report.step_used = gamma;
    JointIterate prev = config.warm_start ? current : z0;
    JointIterate next = fixed_point_sweep(prev, game.poly_a, game.poly_b, game.window, gamma);
    if (options.on_iterate) options.on_iterate(next);
    int t = 0;
    while (((next.a.z - prev.a.z).norm() > inner_tol || (next.b.z - prev.b.z).norm() > inner_tol) &&
           t < config.maxiter) {
      prev = std::move(next);
      next = fixed_point_sweep(prev, game.poly_a, game.poly_b, game.window, gamma);
      if (options.on_iterate) options.on_iterate(next);
      ++t;
    }
    current = std::move(next);
    report.inner_iterations.push_back(t);
    ++l;
    std::tie(da, db) = certify(current);
    if (da + db < best_delta) {
      best_delta = da + db;
      best = current;
    }
  }

  report.outer_passes = l;
  report.converged = da + db <= config.tol;
  if (!report.converged) {
    current = best;
    std::tie(da, db) = certify(current);
  }
  report.delta_a = da;
  report.delta_b = db;
  report.joint = current.to_strategy(T, m);
  report.profit_a = profit_flat(current.a.z, current.b.z, game.window, T, m);
  report.profit_b = profit_flat(current.b.z, current.a.z, game.window, T, m);
  return report;
}

}  // namespace fleetgame
