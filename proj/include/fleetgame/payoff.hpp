#pragma once

// Market revenue (Tullock contest with an abandonment mass), demand-priced
// charging cost, and the analytic gradients that drive the equilibrium solver.

#include "fleetgame/fleet_dynamics.hpp"

#include <optional>

namespace fleetgame {

inline constexpr double kEpsilonFloor = 1e-9;

/// Raw exogenous series from which the composite coefficients are derived.
struct RawProfile {
  Vector requests;          ///< n[k]
  Vector revenue_per_trip;  ///< r[k]
  Matrix energy_price;      ///< c^j[k], T_total x m
  Vector charge_demand;     ///< d_bar[k]
};

/// Exogenous coefficients over the whole time frame, or over a window of it.
struct ScenarioProfile {
  Vector beta;     ///< expected market value per interval, n[k] r[k]
  Vector epsilon;  ///< abandonment mass per interval
  Matrix q;        ///< T x m, c^j[k] d_bar[k]^2
  Index offset = 0;  ///< absolute index of row 0 within the full frame
  std::optional<RawProfile> raw;

  Index length() const { return beta.size(); }
  Index num_categories() const { return q.cols(); }

  /// Rows [start, start + T) of this profile.
  ScenarioProfile window(Index start, Index T) const {
    require(start >= 0 && T >= 1 && start + T <= length(), "window",
            "[" + std::to_string(start) + ", " + std::to_string(start + T) + ") exceeds profile length " +
                std::to_string(length()));
    ScenarioProfile w;
    w.beta = beta.segment(start, T);
    w.epsilon = epsilon.segment(start, T);
    w.q = q.middleRows(start, T);
    w.offset = offset + start;
    return w;
  }

  /// Checks positivity and raw-series consistency; lifts epsilon to its floor.
  void validate_and_normalize(const std::string& prefix = "profiles") {
    const Index n = length();
    require(n >= 1, prefix + ".beta", "must not be empty");
    require(epsilon.size() == n, prefix + ".epsilon",
            "length " + std::to_string(epsilon.size()) + " differs from beta length " + std::to_string(n));
    require(q.rows() == n, prefix + ".q",
            "length " + std::to_string(q.rows()) + " differs from beta length " + std::to_string(n));
    for (Index k = 0; k < n; ++k) {
      require(std::isfinite(beta[k]) && beta[k] > 0.0, prefix + ".beta",
              "entries must be positive (index " + std::to_string(k) + ")");
      require(std::isfinite(epsilon[k]) && epsilon[k] > 0.0, prefix + ".epsilon",
              "entries must be positive (index " + std::to_string(k) + ")");
      epsilon[k] = std::max(epsilon[k], kEpsilonFloor);
      for (Index j = 0; j < q.cols(); ++j)
        require(std::isfinite(q(k, j)) && q(k, j) > 0.0, prefix + ".q",
                "entries must be positive (index " + std::to_string(k) + ")");
    }
    if (!raw) return;
    require(raw->requests.size() == n && raw->revenue_per_trip.size() == n && raw->charge_demand.size() == n &&
                raw->energy_price.rows() == n && raw->energy_price.cols() == q.cols(),
            prefix + ".raw", "series lengths must match beta");
    for (Index k = 0; k < n; ++k) {
      const double b = raw->requests[k] * raw->revenue_per_trip[k];
      require(std::abs(b - beta[k]) <= 1e-9 * std::max(1.0, std::abs(b)), prefix + ".beta",
              "differs from n*r at index " + std::to_string(k));
      for (Index j = 0; j < q.cols(); ++j) {
        const double qq = raw->energy_price(k, j) * raw->charge_demand[k] * raw->charge_demand[k];
        require(std::abs(qq - q(k, j)) <= 1e-9 * std::max(1.0, std::abs(qq)), prefix + ".q",
                "differs from c*d_bar^2 at index " + std::to_string(k));
      }
    }
  }
};

/// beta * phi_i / (phi_i + phi_other + eps); always in [0, beta).
inline double market_revenue(double phi_i, double phi_other, double beta, double eps) {
  require(eps > 0.0, "epsilon", "must be positive");
  return beta * phi_i / (phi_i + phi_other + eps);
}

/// sum_j q[j] u_i[j] (u_i[j] + u_other[j])
template <typename V1, typename V2, typename V3>
double charging_cost(const Eigen::MatrixBase<V1>& u_i, const Eigen::MatrixBase<V2>& u_other,
                     const Eigen::MatrixBase<V3>& q) {
  double cost = 0.0;
  for (Index j = 0; j < u_i.size(); ++j) cost += q(j) * u_i(j) * (u_i(j) + u_other(j));
  return cost;
}

/// Revenue a, revenue b, and the forfeited share of one interval.
struct IntervalShares {
  double revenue_a;
  double revenue_b;
  double forfeited;
};

inline IntervalShares interval_shares(double phi_a, double phi_b, double beta, double eps) {
  const double denom = phi_a + phi_b + eps;
  return {beta * phi_a / denom, beta * phi_b / denom, beta * eps / denom};
}

namespace detail {

inline void check_horizon(Index T_i, Index T_other, const ScenarioProfile& window) {
  require(T_i == T_other, "horizon", "both strategies must span the same horizon");
  require(T_i <= window.length(), "horizon", "strategy horizon exceeds the scenario window");
}

}  // namespace detail

// Flat-vector kernels over z = [phi; U]. The solver calls these directly.

inline double profit_flat(const Vector& z_i, const Vector& z_other, const ScenarioProfile& w, Index T, Index m) {
  double total = 0.0;
  for (Index k = 0; k < T; ++k) {
    total += market_revenue(z_i[k], z_other[k], w.beta[k], w.epsilon[k]);
    total -= charging_cost(z_i.segment(T + k * m, m), z_other.segment(T + k * m, m), w.q.row(k));
  }
  return total;
}

inline Vector profit_gradient_flat(const Vector& z_i, const Vector& z_other, const ScenarioProfile& w, Index T,
                                   Index m) {
  Vector g(z_i.size());
  for (Index k = 0; k < T; ++k) {
    const double s = z_i[k] + z_other[k] + w.epsilon[k];
    g[k] = w.beta[k] * (z_other[k] + w.epsilon[k]) / (s * s);
    for (Index j = 0; j < m; ++j) {
      const Index p = T + k * m + j;
      g[p] = -w.q(k, j) * (2.0 * z_i[p] + z_other[p]);
    }
  }
  return g;
}

inline double total_profit(const Strategy& z_i, const Strategy& z_other, const ScenarioProfile& window) {
  detail::check_horizon(z_i.horizon(), z_other.horizon(), window);
  return profit_flat(z_i.flatten(), z_other.flatten(), window, z_i.horizon(), z_i.num_categories());
}

/// sum_k beta[k] eps[k] / (phi_a[k] + phi_b[k] + eps[k])
inline double lost_profit(const Strategy& z_a, const Strategy& z_b, const ScenarioProfile& window) {
  detail::check_horizon(z_a.horizon(), z_b.horizon(), window);
  double lost = 0.0;
  for (Index k = 0; k < z_a.horizon(); ++k)
    lost += interval_shares(z_a.phi[k], z_b.phi[k], window.beta[k], window.epsilon[k]).forfeited;
  return lost;
}

/// Gradient of company i's profit with respect to its own [phi; U].
inline Vector profit_gradient(const Strategy& z_i, const Strategy& z_other, const ScenarioProfile& window) {
  detail::check_horizon(z_i.horizon(), z_other.horizon(), window);
  return profit_gradient_flat(z_i.flatten(), z_other.flatten(), window, z_i.horizon(), z_i.num_categories());
}

/// F(Z) = -[grad_a J_a; grad_b J_b].
inline Vector pseudogradient(const JointStrategy& joint, const ScenarioProfile& window) {
  const Vector ga = profit_gradient(joint.a, joint.b, window);
  const Vector gb = profit_gradient(joint.b, joint.a, window);
  Vector f(ga.size() + gb.size());
  f << -ga, -gb;
  return f;
}

}  // namespace fleetgame
