#pragma once

// Brute-force verification that shares no code with the projection kernel or
// the equilibrium solver. Feasibility is checked by forward simulation and
// profits are re-evaluated from scratch, so a bug in the polytope assembly or
// in the analytic gradients cannot hide here.

#include "fleetgame/fleet_dynamics.hpp"
#include "fleetgame/payoff.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <vector>

namespace fleetgame {

inline constexpr double kGridPointLimit = 1e7;

namespace oracle_detail {

/// Company profit straight from the model definition.
inline double profit(const Vector& phi, const Matrix& u, const Strategy& rival, const ScenarioProfile& w) {
  double total = 0.0;
  for (Index k = 0; k < phi.size(); ++k) {
    total += w.beta[k] * phi[k] / (phi[k] + rival.phi[k] + w.epsilon[k]);
    for (Index j = 0; j < u.cols(); ++j) total -= w.q(k, j) * u(k, j) * (u(k, j) + rival.u(k, j));
  }
  return total;
}

/// Clips u[k] into [0, x[k]] interval by interval and rebuilds phi; the
/// result is always feasible.
inline Strategy repair(const StateMatrices& mats, const Vector& x0, Matrix u) {
  Strategy s;
  s.phi.resize(u.rows());
  Vector x = x0;
  for (Index k = 0; k < u.rows(); ++k) {
    for (Index j = 0; j < u.cols(); ++j) u(k, j) = std::clamp(u(k, j), 0.0, std::max(0.0, x[j]));
    s.phi[k] = mats.serving.dot(x - u.row(k).transpose());
    x = mats.A * x + mats.B * u.row(k).transpose();
  }
  s.u = std::move(u);
  return s;
}

/// d phi[k] / d u^j[l], a T x mT matrix.
inline Matrix phi_jacobian(const StateMatrices& mats, Index T) {
  const Index m = mats.num_categories();
  Matrix G = Matrix::Zero(T, m * T);
  for (Index l = 0; l < T; ++l) {
    G.block(l, l * m, 1, m) = -mats.serving.transpose();
    Matrix prop = mats.B;  // A^{k-l-1} B
    for (Index k = l + 1; k < T; ++k) {
      G.block(k, l * m, 1, m) = mats.serving.transpose() * prop;
      prop = mats.A * prop;
    }
  }
  return G;
}

/// Gradient of the profit with respect to U alone, phi following U.
inline Matrix reduced_gradient(const Strategy& s, const Strategy& rival, const ScenarioProfile& w,
                               const Matrix& G) {
  const Index T = s.horizon(), m = s.num_categories();
  Vector dphi(T);
  for (Index k = 0; k < T; ++k) {
    const double den = s.phi[k] + rival.phi[k] + w.epsilon[k];
    dphi[k] = w.beta[k] * (rival.phi[k] + w.epsilon[k]) / (den * den);
  }
  const Vector via_phi = G.transpose() * dphi;
  Matrix g(T, m);
  for (Index k = 0; k < T; ++k)
    for (Index j = 0; j < m; ++j)
      g(k, j) = via_phi[k * m + j] - w.q(k, j) * (2.0 * s.u(k, j) + rival.u(k, j));
  return g;
}

inline double grid_size_bound(double fleet_size, Index coordinates, double resolution) {
  const double per_axis = std::floor(fleet_size / resolution) + 1.0;
  return std::pow(per_axis, static_cast<double>(coordinates));
}

/// Depth-first enumeration of every feasible grid plan in lexicographic order.
class GridSearch {
 public:
  GridSearch(const StateMatrices& mats, const Strategy& rival, const ScenarioProfile& w, double resolution)
      : mats_(mats), rival_(rival), w_(w), res_(resolution), T_(rival.horizon()), m_(mats.num_categories()) {}

  Strategy run(const Vector& x0) {
    u_ = Matrix::Zero(T_, m_);
    phi_ = Vector::Zero(T_);
    best_value_ = -std::numeric_limits<double>::infinity();
    visited_ = 0;
    interval(0, x0, 0.0);
    return {best_phi_, best_u_};
  }

  double best_value() const { return best_value_; }

 private:
  void interval(Index k, const Vector& x, double acc) {
    if (k == T_) {
      if (++visited_ > kGridPointLimit)
        throw ValidationError("resolution", "grid exceeds " + std::to_string(static_cast<long long>(kGridPointLimit)) +
                                                " points; use a coarser resolution");
      if (acc > best_value_) {
        best_value_ = acc;
        best_u_ = u_;
        best_phi_ = phi_;
      }
      return;
    }
    category(k, 0, x, acc);
  }

  void category(Index k, Index j, const Vector& x, double acc) {
    if (j == m_) {
      const Vector uk = u_.row(k).transpose();
      phi_[k] = mats_.serving.dot(x - uk);
      double gain = w_.beta[k] * phi_[k] / (phi_[k] + rival_.phi[k] + w_.epsilon[k]);
      for (Index c = 0; c < m_; ++c) gain -= w_.q(k, c) * uk[c] * (uk[c] + rival_.u(k, c));
      interval(k + 1, mats_.A * x + mats_.B * uk, acc + gain);
      return;
    }
    const long steps = static_cast<long>(std::floor(x[j] / res_ + 1e-9));
    for (long s = 0; s <= steps; ++s) {
      u_(k, j) = static_cast<double>(s) * res_;
      category(k, j + 1, x, acc);
    }
    u_(k, j) = 0.0;
  }

  const StateMatrices& mats_;
  const Strategy& rival_;
  const ScenarioProfile& w_;
  double res_;
  Index T_, m_;
  Matrix u_;
  Vector phi_;
  Matrix best_u_;
  Vector best_phi_;
  double best_value_ = 0.0;
  double visited_ = 0;
};

}  // namespace oracle_detail

/// Profit-maximizing plan on the grid {0, res, 2 res, ...}^(mT), rival fixed.
/// Ties go to the lexicographically smallest U (interval-major).
inline Strategy grid_best_response(const FleetParams& fleet, const Strategy& rival, const ScenarioProfile& window,
                                   double resolution) {
  fleet.validate("fleet");
  require(resolution > 0.0 && std::isfinite(resolution), "resolution", "must be positive");
  const Index T = rival.horizon();
  require(T >= 1 && T <= window.length(), "rival", "horizon must fit the scenario window");
  require(rival.num_categories() == fleet.num_categories, "rival", "category count differs from the fleet");
  const double bound = oracle_detail::grid_size_bound(fleet.fleet_size, fleet.num_categories * T, resolution);
  require(bound <= kGridPointLimit, "resolution",
          "grid bound " + std::to_string(bound) + " exceeds the 1e7 point limit; use a coarser resolution");

  const StateMatrices mats = build_state_matrices(fleet);
  oracle_detail::GridSearch search(mats, rival, window, resolution);
  return search.run(fleet.initial_state);
}

/// Profit of a plan against a fixed rival, evaluated independently of the
/// solver's kernels.
inline double oracle_profit(const Strategy& self, const Strategy& rival, const ScenarioProfile& window) {
  return oracle_detail::profit(self.phi, self.u, rival, window);
}

/// A uniformly random feasible grid plan (used to seed best-response dynamics).
inline Strategy random_grid_strategy(const FleetParams& fleet, Index horizon, double resolution,
                                     std::mt19937_64& rng) {
  const StateMatrices mats = build_state_matrices(fleet);
  Matrix u = Matrix::Zero(horizon, fleet.num_categories);
  Vector x = fleet.initial_state;
  for (Index k = 0; k < horizon; ++k) {
    for (Index j = 0; j < fleet.num_categories; ++j) {
      const long steps = static_cast<long>(std::floor(x[j] / resolution + 1e-9));
      u(k, j) = static_cast<double>(std::uniform_int_distribution<long>(0, steps)(rng)) * resolution;
    }
    x = mats.A * x + mats.B * u.row(k).transpose();
  }
  return oracle_detail::repair(mats, fleet.initial_state, u);
}

enum class VerifyMode { automatic, grid, sampling };

struct VerifyOptions {
  VerifyMode mode = VerifyMode::automatic;
  /// Absolute threshold; when unset, relative_tol times the deviating
  /// company's own profit magnitude (at least 1).
  std::optional<double> improvement_tol;
  double relative_tol = 1e-3;
  double resolution = 0.5;  ///< grid mode only
  int random_probes = 200;
  int polish_runs = 50;
  int polish_iterations = 100;
  std::uint64_t seed = 12345;
};

struct VerifyVerdict {
  bool pass = false;
  VerifyMode mode_used = VerifyMode::sampling;
  double improvement_a = 0.0;  ///< best unilateral gain found for a
  double improvement_b = 0.0;
  double threshold_a = 0.0;
  double threshold_b = 0.0;
  double profit_a = 0.0;
  double profit_b = 0.0;
  Strategy deviation_a;  ///< the best deviation found for each company
  Strategy deviation_b;

  double max_improvement() const { return std::max(improvement_a, improvement_b); }
};

namespace oracle_detail {

struct ProbeResult {
  double gain;
  Strategy best;
};

/// Random perturbations plus projected-gradient polishing with Armijo
/// backtracking, all through the clip-and-simulate repair map.
inline ProbeResult sample_deviations(const FleetParams& fleet, const Strategy& self, const Strategy& rival,
                                     const ScenarioProfile& w, const VerifyOptions& opt, std::mt19937_64& rng) {
  const StateMatrices mats = build_state_matrices(fleet);
  const Index T = self.horizon(), m = self.num_categories();
  const Matrix G = phi_jacobian(mats, T);
  const double base = profit(self.phi, self.u, rival, w);
  ProbeResult out{0.0, self};
  double best = base;
  auto consider = [&](const Strategy& s) {
    const double v = profit(s.phi, s.u, rival, w);
    if (v > best) {
      best = v;
      out.best = s;
    }
    return v;
  };

  std::normal_distribution<double> normal(0.0, 1.0);
  auto perturbed = [&](double sigma) {
    Matrix u = self.u;
    for (Index k = 0; k < T; ++k)
      for (Index j = 0; j < m; ++j) u(k, j) += sigma * normal(rng);
    return repair(mats, fleet.initial_state, u);
  };
  auto scale = [&](int i) { return fleet.fleet_size * std::pow(10.0, -1.0 - (i % 4)); };

  for (int i = 0; i < opt.random_probes; ++i) consider(perturbed(scale(i)));

  for (int r = 0; r < opt.polish_runs; ++r) {
    Strategy cur = r == 0 ? repair(mats, fleet.initial_state, self.u) : perturbed(scale(r));
    double val = consider(cur);
    double step = 1.0;
    for (int it = 0; it < opt.polish_iterations; ++it) {
      const Matrix g = reduced_gradient(cur, rival, w, G);
      bool moved = false;
      for (int h = 0; h < 40; ++h) {
        const Strategy cand = repair(mats, fleet.initial_state, cur.u + step * g);
        const double cv = profit(cand.phi, cand.u, rival, w);
        const double decrease = (g.array() * (cand.u - cur.u).array()).sum();
        if (cv >= val + 1e-4 * decrease && cv > val) {
          cur = cand;
          val = cv;
          moved = true;
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    consider(cur);
  }
  out.gain = best - base;
  return out;
}

}  // namespace oracle_detail

/// Largest unilateral improvement either company can find against the other's
/// fixed plan. Grid mode enumerates exact grid best responses; sampling mode
/// probes with random deviations and local ascent.
inline VerifyVerdict verify_equilibrium(const JointStrategy& joint, const FleetParams& fleet_a,
                                        const FleetParams& fleet_b, const ScenarioProfile& window,
                                        const VerifyOptions& options = {}) {
  const Index T = joint.a.horizon();
  require(joint.b.horizon() == T && T <= window.length(), "joint", "horizons must match the scenario window");
  VerifyVerdict v;
  v.profit_a = oracle_profit(joint.a, joint.b, window);
  v.profit_b = oracle_profit(joint.b, joint.a, window);
  v.threshold_a = options.improvement_tol.value_or(options.relative_tol * std::max(1.0, std::abs(v.profit_a)));
  v.threshold_b = options.improvement_tol.value_or(options.relative_tol * std::max(1.0, std::abs(v.profit_b)));

  VerifyMode mode = options.mode;
  if (mode == VerifyMode::automatic) {
    const double bound =
        std::max(oracle_detail::grid_size_bound(fleet_a.fleet_size, fleet_a.num_categories * T, options.resolution),
                 oracle_detail::grid_size_bound(fleet_b.fleet_size, fleet_b.num_categories * T, options.resolution));
    mode = bound <= kGridPointLimit ? VerifyMode::grid : VerifyMode::sampling;
  }
  v.mode_used = mode;

  if (mode == VerifyMode::grid) {
    v.deviation_a = grid_best_response(fleet_a, joint.b, window, options.resolution);
    v.deviation_b = grid_best_response(fleet_b, joint.a, window, options.resolution);
    v.improvement_a = oracle_profit(v.deviation_a, joint.b, window) - v.profit_a;
    v.improvement_b = oracle_profit(v.deviation_b, joint.a, window) - v.profit_b;
  } else {
    std::mt19937_64 rng(options.seed);
    auto ra = oracle_detail::sample_deviations(fleet_a, joint.a, joint.b, window, options, rng);
    auto rb = oracle_detail::sample_deviations(fleet_b, joint.b, joint.a, window, options, rng);
    v.improvement_a = ra.gain;
    v.improvement_b = rb.gain;
    v.deviation_a = std::move(ra.best);
    v.deviation_b = std::move(rb.best);
  }
  v.pass = v.improvement_a <= v.threshold_a && v.improvement_b <= v.threshold_b;
  return v;
}

struct GroundTruthOptions {
  double resolution = 0.5;
  int max_rounds = 500;
  /// Starting plans; zero dispatch when unset.
  std::optional<JointStrategy> start;
};

struct GroundTruth {
  JointStrategy joint;
  int rounds = 0;
};

/// Gauss-Seidel iterated grid best response (a moves, then b answers) until
/// neither plan changes.
inline GroundTruth tiny_ne_ground_truth(const FleetParams& fleet_a, const FleetParams& fleet_b,
                                        const ScenarioProfile& window, const GroundTruthOptions& options = {}) {
  const Index T = window.length();
  JointStrategy cur;
  if (options.start) {
    cur = *options.start;
  } else {
    cur.a = zero_dispatch(build_state_matrices(fleet_a), fleet_a.initial_state, T);
    cur.b = zero_dispatch(build_state_matrices(fleet_b), fleet_b.initial_state, T);
  }
  for (int round = 1; round <= options.max_rounds; ++round) {
    JointStrategy next;
    next.a = grid_best_response(fleet_a, cur.b, window, options.resolution);
    next.b = grid_best_response(fleet_b, next.a, window, options.resolution);
    const double change = std::max((next.a.u - cur.a.u).cwiseAbs().maxCoeff(),
                                   (next.b.u - cur.b.u).cwiseAbs().maxCoeff());
    cur = std::move(next);
    if (change < 0.5 * options.resolution) return {cur, round};
  }
  throw ConvergenceError("tiny_ne_ground_truth: best responses still moving after " +
                         std::to_string(options.max_rounds) + " rounds");
}

}  // namespace fleetgame
