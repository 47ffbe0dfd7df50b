#pragma once

// Dense convex kernels over a StrategyPolytope: Euclidean projection (primal
// active-set QP), active-row detection, non-negative least squares, and the
// KKT stationarity residual used as the equilibrium certificate.

#include "fleetgame/fleet_dynamics.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace fleetgame {

struct ProjectionResult {
  Vector point;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::vector<Index> working_set;  ///< inequality rows held tight at `point`
};

struct ProjectionOptions {
  /// Feasible starting point; the zero-dispatch point is used when empty.
  Vector start;
  /// Inequality rows tight at `start`, e.g. a previous result's working set.
  std::vector<Index> working_set;
  int max_iterations = 10000;
};

namespace detail {

inline Matrix gather_rows(const Matrix& M, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), M.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = M.row(rows[i]);
  return out;
}

}  // namespace detail

/// argmin ||z - query|| over the polytope.
///
/// Primal active-set method from a feasible start. Constraints enter the
/// working set only when they block a step, which keeps the working rows
/// linearly independent, so the Gram system of the equality-constrained
/// subproblem stays nonsingular.
inline ProjectionResult project(const StrategyPolytope& poly, const Vector& query,
                                const ProjectionOptions& options = {}) {
  const Index n = poly.dimension();
  require(query.size() == n, "query", "length must equal the polytope dimension");
  require(query.allFinite(), "query", "must be finite");

  const Index n_eq = poly.L_eq.rows();
  const Index n_in = poly.L_inq.rows();
  const double feas_tol = 1e-9 * (1.0 + poly.r_inq.cwiseAbs().maxCoeff());

  Vector z;
  std::vector<Index> working;
  if (options.start.size() == n && poly.violation(options.start) <= feas_tol) {
    z = options.start;
    for (Index r : options.working_set) {
      if (r < 0 || r >= n_in) continue;
      if (std::abs(poly.L_inq.row(r).dot(z) - poly.r_inq[r]) <= feas_tol) working.push_back(r);
    }
    std::sort(working.begin(), working.end());
    working.erase(std::unique(working.begin(), working.end()), working.end());
  } else {
    z = poly.reference_point();
  }

  std::vector<char> in_working(static_cast<size_t>(n_in), 0);
  for (Index r : working) in_working[static_cast<size_t>(r)] = 1;

  ProjectionResult result;
  Vector mu;
  Matrix A_w;
  bool retried_without_hint = false;

  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    const Index n_w = n_eq + static_cast<Index>(working.size());
    A_w.resize(n_w, n);
    Vector b_w(n_w);
    A_w.topRows(n_eq) = poly.L_eq;
    b_w.head(n_eq) = poly.r_eq;
    for (size_t i = 0; i < working.size(); ++i) {
      A_w.row(n_eq + static_cast<Index>(i)) = poly.L_inq.row(working[i]);
      b_w[n_eq + static_cast<Index>(i)] = poly.r_inq[working[i]];
    }

    // Closest point to `query` on {A_w z = b_w}: z* = query - A_w^T mu.
    const Matrix gram = A_w * A_w.transpose();
    Eigen::LDLT<Matrix> ldlt(gram);
    const Vector d = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || (n_w > 0 && d.minCoeff() <= 1e-12 * std::max(1.0, d.maxCoeff()))) {
      // Only a caller-supplied hint can make the rows dependent.
      if (retried_without_hint) throw ConvergenceError("project: degenerate working set");
      retried_without_hint = true;
      for (Index r : working) in_working[static_cast<size_t>(r)] = 0;
      working.clear();
      continue;
    }
    mu = ldlt.solve(A_w * query - b_w);
    const Vector target = query - A_w.transpose() * mu;
    const Vector step = target - z;

    const double step_scale = 1.0 + z.cwiseAbs().maxCoeff() + query.cwiseAbs().maxCoeff();
    if (step.cwiseAbs().maxCoeff() <= 1e-12 * step_scale) {
      z = target;
      // Inequality multipliers are mu's tail; all must be non-negative.
      Index worst = -1;
      double worst_value = -1e-12 * std::max(1.0, (query - z).cwiseAbs().maxCoeff());
      for (size_t i = 0; i < working.size(); ++i) {
        const double lam = mu[n_eq + static_cast<Index>(i)];
        if (lam < worst_value) {
          worst_value = lam;
          worst = static_cast<Index>(i);
        }
      }
      if (worst < 0) {
        result.point = z;
        result.working_set = working;
        result.primal_residual = poly.violation(z);
        const Vector stationarity = z - query + A_w.transpose() * mu;
        double dual = stationarity.cwiseAbs().maxCoeff();
        for (size_t i = 0; i < working.size(); ++i)
          dual = std::max(dual, -mu[n_eq + static_cast<Index>(i)]);
        result.dual_residual = dual;
        return result;
      }
      in_working[static_cast<size_t>(working[static_cast<size_t>(worst)])] = 0;
      working.erase(working.begin() + worst);
      continue;
    }

    // Ratio test against rows outside the working set. A blocking row that
    // already lies in the span of the working rows keeps its value along the
    // step (it is a degenerate copy of the active face) and is skipped.
    const Vector Gp = poly.L_inq * step;
    const Vector slack = poly.r_inq - poly.L_inq * z;
    const double step_norm = step.norm();
    std::vector<char> skipped(static_cast<size_t>(n_in), 0);
    double alpha = 1.0;
    Index blocking = -1;
    while (true) {
      alpha = 1.0;
      blocking = -1;
      for (Index r = 0; r < n_in; ++r) {
        if (in_working[static_cast<size_t>(r)] || skipped[static_cast<size_t>(r)]) continue;
        if (Gp[r] <= 1e-14 * step_norm * poly.L_inq.row(r).norm()) continue;
        const double ratio = std::max(0.0, slack[r]) / Gp[r];
        if (ratio < alpha) {
          alpha = ratio;
          blocking = r;
        }
      }
      if (blocking < 0) break;
      const Vector row = poly.L_inq.row(blocking).transpose();
      const Vector coeff = ldlt.solve(A_w * row);
      if ((row - A_w.transpose() * coeff).norm() > 1e-8 * row.norm()) break;
      skipped[static_cast<size_t>(blocking)] = 1;
    }
    z += alpha * step;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<size_t>(blocking)] = 1;
    }
  }
  throw ConvergenceError("project: no convergence within " + std::to_string(options.max_iterations) +
                         " iterations");
}

/// Inequality rows j with |L_inq^j z - r_inq^j| <= tol (1 + |r_inq^j|).
inline std::vector<Index> active_set(const StrategyPolytope& poly, const Vector& point, double activity_tol = 1e-6) {
  require(point.size() == poly.dimension(), "point", "length must equal the polytope dimension");
  std::vector<Index> rows;
  const Vector lhs = poly.L_inq * point;
  for (Index r = 0; r < poly.L_inq.rows(); ++r)
    if (std::abs(lhs[r] - poly.r_inq[r]) <= activity_tol * (1.0 + std::abs(poly.r_inq[r]))) rows.push_back(r);
  return rows;
}

struct NnlsResult {
  Vector x;
  int iterations = 0;
};

/// min ||A x - b|| subject to x >= 0 (Lawson-Hanson active set).
inline NnlsResult nnls(const Matrix& A, const Vector& b, int max_iterations = 0) {
  const Index n = A.cols();
  require(A.rows() == b.size(), "nnls", "A and b row counts differ");
  if (max_iterations <= 0) max_iterations = static_cast<int>(30 * std::max<Index>(n, 1));

  NnlsResult out;
  out.x = Vector::Zero(n);
  if (n == 0) return out;

  const double tol = 1e-12 * (1.0 + A.cwiseAbs().maxCoeff() * (1.0 + b.cwiseAbs().maxCoeff())) *
                     static_cast<double>(std::max(A.rows(), n));
  std::vector<char> passive(static_cast<size_t>(n), 0);
  Vector& x = out.x;

  auto solve_passive = [&]() {
    std::vector<Index> cols;
    for (Index j = 0; j < n; ++j)
      if (passive[static_cast<size_t>(j)]) cols.push_back(j);
    Matrix Ap(A.rows(), static_cast<Index>(cols.size()));
    for (size_t i = 0; i < cols.size(); ++i) Ap.col(static_cast<Index>(i)) = A.col(cols[i]);
    const Vector sp = Ap.completeOrthogonalDecomposition().solve(b);
    Vector s = Vector::Zero(n);
    for (size_t i = 0; i < cols.size(); ++i) s[cols[i]] = sp[static_cast<Index>(i)];
    return s;
  };

  Vector w = A.transpose() * (b - A * x);
  while (true) {
    Index best = -1;
    double best_w = tol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[static_cast<size_t>(j)] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    if (++out.iterations > max_iterations) throw ConvergenceError("nnls: iteration cap exceeded");
    passive[static_cast<size_t>(best)] = 1;

    Vector s = solve_passive();
    while (true) {
      double min_s = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < n; ++j)
        if (passive[static_cast<size_t>(j)]) min_s = std::min(min_s, s[j]);
      if (min_s > 0.0) break;
      if (++out.iterations > max_iterations) throw ConvergenceError("nnls: iteration cap exceeded");
      double alpha = 1.0;
      for (Index j = 0; j < n; ++j)
        if (passive[static_cast<size_t>(j)] && s[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - s[j]));
      x += alpha * (s - x);
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<size_t>(j)] && x[j] <= tol) {
          passive[static_cast<size_t>(j)] = 0;
          x[j] = 0.0;
        }
      }
      s = solve_passive();
    }
    x = s;
    for (Index j = 0; j < n; ++j)
      if (!passive[static_cast<size_t>(j)]) x[j] = 0.0;
    // An entering column that is dropped straight away cannot reduce the
    // residual any further at this tolerance.
    if (!passive[static_cast<size_t>(best)]) break;
    w = A.transpose() * (b - A * x);
  }
  return out;
}

/// Optimality certificate of one company's best-response problem.
struct ResidualReport {
  double delta = 0.0;
  Vector lambda;  ///< one entry per L_inq row; zero off the active set
  Vector nu;      ///< one entry per L_eq row
  std::vector<Index> active_rows;
};

/// delta = min ||-grad + L_inq^T lambda + L_eq^T nu||^2 with lambda >= 0 on
/// active rows and lambda = 0 elsewhere.
///
/// nu is eliminated first: with P the orthogonal projector onto the
/// complement of range(L_eq^T) the problem becomes the NNLS
/// min_{lambda >= 0} ||P G_A^T lambda - P grad||, after which nu is the
/// least-squares fit of the remaining residual.
inline ResidualReport stationarity_residual(const StrategyPolytope& poly, const Vector& z, const Vector& grad,
                                            double activity_tol = 1e-6) {
  const Index n = poly.dimension();
  require(z.size() == n && grad.size() == n, "stationarity_residual", "dimension mismatch");

  ResidualReport rep;
  rep.active_rows = active_set(poly, z, activity_tol);
  rep.lambda = Vector::Zero(poly.L_inq.rows());

  const Matrix Et = poly.L_eq.transpose();
  Eigen::HouseholderQR<Matrix> qr(Et);
  const Matrix Q1 = qr.householderQ() * Matrix::Identity(n, Et.cols());
  auto complement = [&](const Matrix& M) -> Matrix { return M - Q1 * (Q1.transpose() * M); };

  const Matrix GAt = detail::gather_rows(poly.L_inq, rep.active_rows).transpose();
  const NnlsResult sol = nnls(complement(GAt), complement(grad));
  for (size_t i = 0; i < rep.active_rows.size(); ++i)
    rep.lambda[rep.active_rows[i]] = std::max(0.0, sol.x[static_cast<Index>(i)]);

  const Vector partial = -grad + poly.L_inq.transpose() * rep.lambda;
  rep.nu = qr.solve(-partial);
  rep.delta = (partial + Et * rep.nu).squaredNorm();
  return rep;
}

}  // namespace fleetgame
