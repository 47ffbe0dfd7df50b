#pragma once

// Aggregate battery-category model of one company's fleet and the polytope of
// its admissible (operating, dispatch) trajectories over a planning horizon.

#include "fleetgame/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fleetgame {

/// One company's fleet. Categories are ascending by battery level; category 0
/// is critical and never serves demand.
struct FleetParams {
  double fleet_size = 0.0;
  int num_categories = 0;
  Vector retention;      ///< alpha^j, fraction of undispatched category-j vehicles staying put
  Vector initial_state;  ///< vehicles per category at the start of the horizon

  void validate(const std::string& prefix = "fleet") const {
    require(num_categories >= 2, prefix + ".num_categories", "must be at least 2");
    require(retention.size() == num_categories, prefix + ".retention",
            "length must equal num_categories (" + std::to_string(num_categories) + ")");
    require(initial_state.size() == num_categories, prefix + ".initial_state",
            "length must equal num_categories (" + std::to_string(num_categories) + ")");
    for (Index j = 0; j < retention.size(); ++j)
      require(std::isfinite(retention[j]) && retention[j] >= 0.0 && retention[j] <= 1.0,
              prefix + ".retention", "entries must lie in [0, 1]");
    for (Index j = 0; j < initial_state.size(); ++j)
      require(std::isfinite(initial_state[j]) && initial_state[j] >= 0.0, prefix + ".initial_state",
              "entries must be non-negative");
    require(std::isfinite(fleet_size) && fleet_size > 0.0, prefix + ".fleet_size", "must be positive");
    require(std::abs(initial_state.sum() - fleet_size) <= 1e-9 * std::max(1.0, fleet_size),
            prefix + ".initial_state", "entries must sum to fleet_size");
  }
};

/// x[k+1] = A x[k] + B u[k], phi[k] = serving^T (x[k] - u[k]).
struct StateMatrices {
  Matrix A;
  Matrix B;
  Vector serving;  ///< the 0/1 selector of categories able to serve demand

  Index num_categories() const { return A.rows(); }
};

/// A company's plan over T intervals: operating vehicles and dispatches.
struct Strategy {
  Vector phi;  ///< length T
  Matrix u;    ///< T x m, row k holds the dispatch vector of interval k

  Index horizon() const { return phi.size(); }
  Index num_categories() const { return u.cols(); }

  /// Stacked decision vector [phi; u[0]; ...; u[T-1]].
  Vector flatten() const {
    const Index T = horizon(), m = num_categories();
    Vector z(T + m * T);
    z.head(T) = phi;
    for (Index k = 0; k < T; ++k) z.segment(T + k * m, m) = u.row(k).transpose();
    return z;
  }

  static Strategy from_flat(const Vector& z, Index T, Index m) {
    require(z.size() == T + m * T, "strategy", "flat vector has wrong length");
    Strategy s;
    s.phi = z.head(T);
    s.u.resize(T, m);
    for (Index k = 0; k < T; ++k) s.u.row(k) = z.segment(T + k * m, m).transpose();
    return s;
  }
};

struct JointStrategy {
  Strategy a;
  Strategy b;

  Strategy& operator[](Company c) { return c == Company::a ? a : b; }
  const Strategy& operator[](Company c) const { return c == Company::a ? a : b; }
};

/// {z : L_inq z <= r_inq, L_eq z = r_eq} over z = [phi; U].
///
/// A freshly built polytope has 2mT inequality rows (x[k] - u[k] >= 0, then
/// u[k] >= 0) and T equality rows. Pinning a control with zero initial stock
/// removes its two k = 0 inequality rows and appends the equality u^j[0] = 0;
/// `inequality_rows` keeps the original index of every surviving row.
struct StrategyPolytope {
  Matrix L_inq;
  Vector r_inq;
  Matrix L_eq;
  Vector r_eq;
  Index horizon = 0;
  Index num_categories = 0;

  Matrix stacked_L;  ///< vstack(L[k]) over k, mT x mT
  Vector stacked_r;  ///< col(r[k]) over k, r[k] = -A^k x0
  Vector serving;
  std::vector<Index> inequality_rows;
  std::vector<Index> pinned_categories;

  Index dimension() const { return horizon + num_categories * horizon; }

  /// The zero-dispatch point, feasible for every well-formed polytope.
  Vector reference_point() const {
    Vector z = Vector::Zero(dimension());
    z.head(horizon) = -r_eq.head(horizon);
    return z;
  }

  /// Largest constraint violation of z (0 when feasible).
  double violation(const Vector& z) const {
    double worst = 0.0;
    if (L_inq.rows() > 0) worst = std::max(worst, (L_inq * z - r_inq).maxCoeff());
    if (L_eq.rows() > 0) worst = std::max(worst, (L_eq * z - r_eq).cwiseAbs().maxCoeff());
    return worst;
  }

  bool contains(const Vector& z, double tol = 1e-6) const {
    return z.size() == dimension() && violation(z) <= tol;
  }
};

/// Categories with zero initial stock; their k = 0 dispatch must be pinned to
/// zero for the polytope to admit a strictly feasible point.
struct SlaterReport {
  std::vector<Index> zero_categories;
  bool slater_holds = true;

  /// Original L_inq row indices that become the equality u^j[0] = 0.
  std::vector<Index> rows_to_convert(Index horizon, Index m) const {
    std::vector<Index> rows;
    for (Index j : zero_categories) {
      rows.push_back(j);
      rows.push_back(m * horizon + j);
    }
    return rows;
  }
};

inline constexpr double kZeroStock = 1e-9;

inline StateMatrices build_state_matrices(const FleetParams& params) {
  const int m = params.num_categories;
  require(m >= 2, "num_categories", "must be at least 2");
  require(params.retention.size() == m, "retention", "length must equal num_categories");
  for (Index j = 0; j < m; ++j)
    require(params.retention[j] >= 0.0 && params.retention[j] <= 1.0, "retention",
            "entries must lie in [0, 1]");

  const Vector& alpha = params.retention;
  StateMatrices mats{Matrix::Zero(m, m), Matrix::Zero(m, m), Vector::Ones(m)};
  mats.serving[0] = 0.0;

  // Row j collects every flow that ends in category j.
  mats.A(0, 0) = 1.0;
  mats.B(0, 0) = -1.0;
  for (int j = 1; j < m; ++j) {
    mats.A(j, j) = alpha[j];
    mats.B(j, j) = -alpha[j];
    mats.A(j - 1, j) = 1.0 - alpha[j];
    mats.B(j - 1, j) = -(1.0 - alpha[j]);
    mats.B(j, j - 1) += 1.0;
  }
  mats.B(m - 1, m - 1) += 1.0;  // top-category dispatches stay on top
  return mats;
}

/// States x[0..K] under controls u[0..K-1]. Feasibility is not enforced.
inline std::vector<Vector> simulate(const StateMatrices& mats, const Vector& x0,
                                    const std::vector<Vector>& controls) {
  const Index m = mats.num_categories();
  require(x0.size() == m, "x0", "length must equal num_categories");
  std::vector<Vector> states;
  states.reserve(controls.size() + 1);
  states.push_back(x0);
  for (const Vector& u : controls) {
    require(u.size() == m, "controls", "every control vector must have num_categories entries");
    states.push_back(mats.A * states.back() + mats.B * u);
  }
  return states;
}

inline std::vector<Vector> simulate(const StateMatrices& mats, const Vector& x0, const Matrix& u) {
  std::vector<Vector> controls;
  for (Index k = 0; k < u.rows(); ++k) controls.push_back(u.row(k).transpose());
  return simulate(mats, x0, controls);
}

inline StrategyPolytope build_polytope(const StateMatrices& mats, const Vector& x0, Index horizon) {
  const Index m = mats.num_categories();
  const Index T = horizon;
  require(T >= 1, "horizon", "must be at least 1");
  require(x0.size() == m, "x0", "length must equal num_categories");

  // powers[p] = A^p
  std::vector<Matrix> powers{Matrix::Identity(m, m)};
  for (Index p = 1; p <= T; ++p) powers.push_back(mats.A * powers.back());

  StrategyPolytope poly;
  poly.horizon = T;
  poly.num_categories = m;
  poly.serving = mats.serving;
  poly.stacked_L = Matrix::Zero(m * T, m * T);
  poly.stacked_r.resize(m * T);
  for (Index k = 0; k < T; ++k) {
    for (Index l = 0; l < k; ++l)
      poly.stacked_L.block(k * m, l * m, m, m) = powers[k - l - 1] * mats.B;
    poly.stacked_L.block(k * m, k * m, m, m) = -Matrix::Identity(m, m);
    poly.stacked_r.segment(k * m, m) = -powers[k] * x0;
  }

  const Index n = T + m * T;
  poly.L_inq = Matrix::Zero(2 * m * T, n);
  poly.L_inq.block(0, T, m * T, m * T) = -poly.stacked_L;
  poly.L_inq.block(m * T, T, m * T, m * T) = -Matrix::Identity(m * T, m * T);
  poly.r_inq = Vector::Zero(2 * m * T);
  poly.r_inq.head(m * T) = -poly.stacked_r;

  // -phi[k] + serving^T L[k] U = serving^T r[k]
  poly.L_eq = Matrix::Zero(T, n);
  poly.r_eq.resize(T);
  for (Index k = 0; k < T; ++k) {
    poly.L_eq(k, k) = -1.0;
    poly.L_eq.block(k, T, 1, m * T) = mats.serving.transpose() * poly.stacked_L.middleRows(k * m, m);
    poly.r_eq[k] = mats.serving.dot(poly.stacked_r.segment(k * m, m));
  }

  poly.inequality_rows.resize(2 * m * T);
  for (Index r = 0; r < 2 * m * T; ++r) poly.inequality_rows[r] = r;
  return poly;
}

inline SlaterReport check_initial_feasibility(const FleetParams& params) {
  SlaterReport report;
  for (Index j = 0; j < params.initial_state.size(); ++j)
    if (params.initial_state[j] <= kZeroStock) report.zero_categories.push_back(j);
  report.slater_holds = report.zero_categories.empty();
  return report;
}

/// Converts the k = 0 box rows of every zero-stock category into u^j[0] = 0.
inline StrategyPolytope apply_slater_report(const StrategyPolytope& poly, const SlaterReport& report) {
  if (report.zero_categories.empty()) return poly;
  const Index T = poly.horizon, m = poly.num_categories, n = poly.dimension();
  const std::vector<Index> drop = report.rows_to_convert(T, m);

  StrategyPolytope out = poly;
  std::vector<Index> keep;
  for (Index r = 0; r < poly.L_inq.rows(); ++r) {
    const Index orig = poly.inequality_rows[static_cast<size_t>(r)];
    if (std::find(drop.begin(), drop.end(), orig) == drop.end()) keep.push_back(r);
  }
  out.L_inq.resize(static_cast<Index>(keep.size()), n);
  out.r_inq.resize(static_cast<Index>(keep.size()));
  out.inequality_rows.clear();
  for (size_t i = 0; i < keep.size(); ++i) {
    out.L_inq.row(static_cast<Index>(i)) = poly.L_inq.row(keep[i]);
    out.r_inq[static_cast<Index>(i)] = poly.r_inq[keep[i]];
    out.inequality_rows.push_back(poly.inequality_rows[static_cast<size_t>(keep[i])]);
  }

  const Index extra = static_cast<Index>(report.zero_categories.size());
  out.L_eq.conservativeResize(poly.L_eq.rows() + extra, n);
  out.r_eq.conservativeResize(poly.r_eq.size() + extra);
  for (Index i = 0; i < extra; ++i) {
    const Index row = poly.L_eq.rows() + i;
    out.L_eq.row(row).setZero();
    out.L_eq(row, T + report.zero_categories[static_cast<size_t>(i)]) = 1.0;
    out.r_eq[row] = 0.0;
  }
  out.pinned_categories = report.zero_categories;
  return out;
}

/// Matrices, polytope and Slater pinning for one company in one call.
inline StrategyPolytope build_company_polytope(const FleetParams& params, Index horizon) {
  const StateMatrices mats = build_state_matrices(params);
  return apply_slater_report(build_polytope(mats, params.initial_state, horizon),
                             check_initial_feasibility(params));
}

/// Operating counts implied by the dispatch plan `u` starting from x0.
inline Vector operating_counts(const StateMatrices& mats, const Vector& x0, const Matrix& u) {
  const auto states = simulate(mats, x0, u);
  Vector phi(u.rows());
  for (Index k = 0; k < u.rows(); ++k) phi[k] = mats.serving.dot(states[k] - u.row(k).transpose());
  return phi;
}

/// The never-dispatch plan: u = 0, phi[k] = serving^T A^k x0.
inline Strategy zero_dispatch(const StateMatrices& mats, const Vector& x0, Index horizon) {
  Strategy s;
  s.u = Matrix::Zero(horizon, mats.num_categories());
  s.phi = operating_counts(mats, x0, s.u);
  return s;
}

}  // namespace fleetgame
