// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "fleetgame/fleetgame.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace fleetgame;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

FleetParams fleet(std::initializer_list<double> x0) {
  FleetParams f;
  f.num_categories = static_cast<int>(x0.size());
  f.initial_state.resize(f.num_categories);
  Index j = 0;
  for (double v : x0) f.initial_state[j++] = v;
  f.fleet_size = f.initial_state.sum();
  f.retention = Vector::Zero(f.num_categories);
  return f;
}

const Scenario& bundled() {
  static const Scenario sc = load_scenario(std::string(FLEETGAME_SCENARIO_DIR) + "/case_study.scenario");
  return sc;
}

Strategy random_plan(const FleetParams& f, Index T, std::mt19937_64& rng) {
  const StateMatrices mats = build_state_matrices(f);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix u(T, f.num_categories);
  Vector x = f.initial_state;
  for (Index k = 0; k < T; ++k) {
    for (Index j = 0; j < f.num_categories; ++j) u(k, j) = unit(rng) * x[j];
    x = (mats.A * x + mats.B * u.row(k).transpose()).cwiseMax(0.0);
  }
  return Strategy{operating_counts(mats, f.initial_state, u), u};
}

const TrajectoryLog& run(Index T) {
  static std::map<Index, TrajectoryLog> cache;
  auto it = cache.find(T);
  if (it == cache.end()) {
    const Scenario& sc = bundled();
    it = cache.emplace(T, run_receding_horizon(sc.fleet_a, sc.fleet_b, sc.profile, T, sc.solver)).first;
  }
  return it->second;
}

struct Outcome {
  bool pass;
  std::string detail;
};

// 1. analytic gradient against central differences
Outcome gradient_check() {
  const auto t0 = Clock::now();
  const Scenario& sc = bundled();
  const ScenarioProfile w = sc.profile.window(2, 4);
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Strategy self = random_plan(sc.fleet_a, 4, rng), rival = random_plan(sc.fleet_b, 4, rng);
    const Vector z = self.flatten(), zo = rival.flatten();
    const Vector g = profit_gradient_flat(z, zo, w, 4, 3);
    for (Index c = 0; c < z.size(); ++c) {
      const double h = 1e-4 * std::max(1.0, std::abs(z[c]));
      Vector zp = z, zm = z;
      zp[c] += h;
      zm[c] -= h;
      const double fd = (profit_flat(zp, zo, w, 4, 3) - profit_flat(zm, zo, w, 4, 3)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[c]) / std::max(1.0, std::abs(g[c])));
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "max relative error " << worst << " over 100 points, " << secs << " s";
  return {worst <= 1e-6 && secs < 5.0, d.str()};
}

// 2. fleet conservation under random dispatch
Outcome conservation() {
  const Scenario& sc = bundled();
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    for (const FleetParams* f : {&sc.fleet_a, &sc.fleet_b}) {
      const Strategy s = random_plan(*f, 9, rng);
      for (const Vector& x : simulate(build_state_matrices(*f), f->initial_state, s.u))
        worst = std::max(worst, std::abs(x.sum() - f->fleet_size) / f->fleet_size);
    }
  }
  std::ostringstream d;
  d << "max relative drift " << worst << " over 50 sequences";
  return {worst <= 1e-12, d.str()};
}

// 3. projection against exhaustive active-set enumeration
Outcome projection_check() {
  const auto t0 = Clock::now();
  const StrategyPolytope p = build_company_polytope(fleet({3, 5}), 2);
  const Index n_in = p.L_inq.rows();
  std::mt19937_64 rng(103);
  std::normal_distribution<double> normal(0.0, 6.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Vector q = Vector::NullaryExpr(p.dimension(), [&] { return normal(rng); });
    double best = std::numeric_limits<double>::infinity();
    Vector best_z;
    for (long mask = 0; mask < (1L << n_in); ++mask) {
      std::vector<Index> rows;
      for (Index r = 0; r < n_in; ++r)
        if (mask & (1L << r)) rows.push_back(r);
      Matrix M(p.L_eq.rows() + static_cast<Index>(rows.size()), p.dimension());
      Vector b(M.rows());
      M.topRows(p.L_eq.rows()) = p.L_eq;
      b.head(p.L_eq.rows()) = p.r_eq;
      for (size_t r = 0; r < rows.size(); ++r) {
        M.row(p.L_eq.rows() + static_cast<Index>(r)) = p.L_inq.row(rows[r]);
        b[p.L_eq.rows() + static_cast<Index>(r)] = p.r_inq[rows[r]];
      }
      const Vector z = q - M.transpose() * Eigen::CompleteOrthogonalDecomposition<Matrix>(M * M.transpose())
                                              .solve(M * q - b);
      if ((M * z - b).cwiseAbs().maxCoeff() > 1e-9 || !p.contains(z, 1e-9)) continue;
      if ((z - q).norm() < best) {
        best = (z - q).norm();
        best_z = z;
      }
    }
    worst = std::max(worst, (project(p, q).point - best_z).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "max deviation " << worst << " over 50 queries, " << secs << " s";
  return {worst <= 1e-6 && secs < 30.0, d.str()};
}

// 4. micro game against iterated grid best response
Outcome micro_game() {
  const FleetParams f = fleet({5, 5});
  ScenarioProfile w;
  w.beta = Vector::Constant(1, 100.0);
  w.epsilon = Vector::Constant(1, 1.0);
  w.q = Matrix::Constant(1, 2, 0.01);
  SolverConfig cfg;
  cfg.tol = 1e-8;
  const SolveReport rep = solve_ne(make_game(f, f, w), cfg);
  GroundTruthOptions gto;
  gto.resolution = 0.01;
  const GroundTruth gt = tiny_ne_ground_truth(f, f, w, gto);
  const double gap = std::max((gt.joint.a.u - rep.joint.a.u).cwiseAbs().maxCoeff(),
                              (gt.joint.b.u - rep.joint.b.u).cwiseAbs().maxCoeff());
  VerifyOptions vo;
  vo.improvement_tol = 1e-3;
  vo.resolution = 0.01;
  const VerifyVerdict v = verify_equilibrium(rep.joint, f, f, w, vo);
  std::ostringstream d;
  d << "solver vs grid ground truth " << gap << " (limit 0.02), best grid deviation gain "
    << v.max_improvement() << " (limit 1e-3)";
  return {rep.converged && gap <= 0.02 && v.pass, d.str()};
}

// 5. bundled scenario certifies quickly and survives deviation sampling
Outcome bundled_certificate() {
  const Scenario& sc = bundled();
  const auto t0 = Clock::now();
  const Game g = make_game(sc.fleet_a, sc.fleet_b, sc.profile);
  const SolveReport rep = solve_ne(g, sc.solver);
  const double secs = seconds_since(t0);
  VerifyOptions vo;
  vo.mode = VerifyMode::sampling;
  const VerifyVerdict v = verify_equilibrium(rep.joint, sc.fleet_a, sc.fleet_b, sc.profile, vo);
  std::ostringstream d;
  d << "delta " << rep.delta() << " in " << secs << " s; sampled gains " << v.improvement_a << " / "
    << v.improvement_b << " against thresholds " << v.threshold_a << " / " << v.threshold_b;
  return {rep.converged && rep.delta() <= 0.01 && secs < 60.0 && v.pass, d.str()};
}

// 6. uniqueness: random starts land on the same point
Outcome random_starts() {
  const Scenario& sc = bundled();
  const Game g = make_game(sc.fleet_a, sc.fleet_b, sc.profile);
  std::vector<Vector> sols;
  bool all_converged = true;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SolveOptions o;
    o.init = InitKind::random;
    o.seed = seed;
    const SolveReport rep = solve_ne(g, sc.solver, o);
    all_converged = all_converged && rep.converged;
    Vector z(2 * rep.joint.a.flatten().size());
    z << rep.joint.a.flatten(), rep.joint.b.flatten();
    sols.push_back(z);
  }
  double worst = 0.0;
  for (size_t i = 0; i < sols.size(); ++i)
    for (size_t j = i + 1; j < sols.size(); ++j) worst = std::max(worst, (sols[i] - sols[j]).cwiseAbs().maxCoeff());
  std::ostringstream d;
  d << "max pairwise coordinate gap " << worst << " over 10 random starts";
  return {all_converged && worst <= 1e-2, d.str()};
}

// 7. longer horizons earn more and forfeit less
Outcome horizon_ordering() {
  const TrajectoryLog &r3 = run(3), &r6 = run(6), &r9 = run(9);
  const bool ok = r3.total_profit_a() < r6.total_profit_a() && r6.total_profit_a() < r9.total_profit_a() &&
                  r3.total_profit_b() < r6.total_profit_b() && r6.total_profit_b() < r9.total_profit_b() &&
                  r3.total_lost() > r6.total_lost() && r6.total_lost() > r9.total_lost();
  std::ostringstream d;
  d.precision(10);
  for (Index T : {3, 6, 9})
    d << "T=" << T << " (" << run(T).total_profit_a() << ", " << run(T).total_profit_b() << ", "
      << run(T).total_lost() << ") ";
  return {ok, d.str()};
}

// 8. solve counts and open-loop equivalence
Outcome solve_counts() {
  const Scenario& sc = bundled();
  const TrajectoryLog open = plan_open_loop(sc.fleet_a, sc.fleet_b, sc.profile, sc.solver);
  bool same = open.intervals.size() == run(9).intervals.size();
  for (size_t k = 0; same && k < open.intervals.size(); ++k)
    same = open.intervals[k].u_a == run(9).intervals[k].u_a && open.intervals[k].u_b == run(9).intervals[k].u_b &&
           open.intervals[k].cum_profit_a == run(9).intervals[k].cum_profit_a;
  std::ostringstream d;
  d << "solves T=3: " << run(3).solves.size() << ", T=6: " << run(6).solves.size()
    << ", T=9 identical to open loop: " << (same ? "yes" : "no");
  return {run(3).solves.size() == 7 && run(6).solves.size() == 4 && run(9).solves.size() == 1 && same, d.str()};
}

// 9. revenue shares plus forfeited demand add up to beta
Outcome share_partition() {
  double worst = 0.0;
  std::size_t checked = 0;
  for (Index T : {3, 6, 9}) {
    for (const IntervalRecord& iv : run(T).intervals) {
      worst = std::max(worst, std::abs(iv.revenue_a + iv.revenue_b + iv.forfeited - iv.beta) / iv.beta);
      ++checked;
    }
  }
  std::ostringstream d;
  d << "max relative gap " << worst << " over " << checked << " intervals";
  return {worst <= 1e-9, d.str()};
}

// 10. strong monotonicity of the pseudogradient
Outcome monotonicity() {
  const Scenario& sc = bundled();
  std::mt19937_64 rng(110);
  double mu = std::numeric_limits<double>::infinity();
  bool all_nonnegative = true;
  for (int i = 0; i < 200; ++i) {
    const JointStrategy z1{random_plan(sc.fleet_a, 9, rng), random_plan(sc.fleet_b, 9, rng)};
    const JointStrategy z2{random_plan(sc.fleet_a, 9, rng), random_plan(sc.fleet_b, 9, rng)};
    Vector d1(2 * z1.a.flatten().size()), d2(d1.size());
    d1 << z1.a.flatten(), z1.b.flatten();
    d2 << z2.a.flatten(), z2.b.flatten();
    const Vector diff = d1 - d2;
    const double inner = (pseudogradient(z1, sc.profile) - pseudogradient(z2, sc.profile)).dot(diff);
    all_nonnegative = all_nonnegative && inner >= 0.0;
    mu = std::min(mu, inner / diff.squaredNorm());
  }
  std::ostringstream d;
  d << "estimated modulus " << mu << " over 200 pairs";
  return {all_nonnegative && mu > 0.0, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient matches finite differences", gradient_check},
      {"fleet size is conserved", conservation},
      {"projection matches enumeration", projection_check},
      {"micro game matches grid ground truth", micro_game},
      {"bundled scenario certifies and resists deviations", bundled_certificate},
      {"random starts agree", random_starts},
      {"longer horizons earn more and lose less", horizon_ordering},
      {"solve counts and open-loop equivalence", solve_counts},
      {"revenue shares partition demand", share_partition},
      {"pseudogradient is strongly monotone", monotonicity},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %zu: %s -- %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
