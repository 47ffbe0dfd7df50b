#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace fleetgame;
using namespace fleetgame::testing;

namespace {

Strategy absent_rival(Index T, Index m) { return Strategy{Vector::Zero(T), Matrix::Zero(T, m)}; }

/// Cheap charging early, demand concentrated late.
ScenarioProfile late_peak() {
  ScenarioProfile p;
  p.beta = Vector(2);
  p.beta << 20.0, 100.0;
  p.epsilon = Vector::Constant(2, 1.0);
  p.q = Matrix(2, 2);
  p.q << 0.05, 0.05, 2.0, 2.0;
  return p;
}

}  // namespace

TEST(GridBestResponse, ServesWithEverythingAgainstAbsentRivalInOneInterval) {
  const FleetParams f = make_fleet({2, 3});
  const Strategy br = grid_best_response(f, absent_rival(1, 2), constant_profile(1, 2, 50, 1, 0.1), 0.5);
  EXPECT_TRUE(br.u.isZero());
  EXPECT_DOUBLE_EQ(br.phi[0], 3.0);
}

TEST(GridBestResponse, WorthlessMarketMeansNoCharging) {
  const FleetParams f = make_fleet({2, 3});
  const Strategy br = grid_best_response(f, absent_rival(3, 2), constant_profile(3, 2, 0, 1, 0.1), 0.5);
  EXPECT_TRUE(br.u.isZero());
}

TEST(GridBestResponse, NoRandomGridPlanDoesBetter) {
  const FleetParams f = make_fleet({2, 2});
  const FleetParams rf = make_fleet({1, 3});
  const ScenarioProfile w = late_peak();
  std::mt19937_64 rng(11);
  const Strategy rival = random_grid_strategy(rf, 2, 0.5, rng);
  const Strategy br = grid_best_response(f, rival, w, 0.5);
  const double best = oracle_profit(br, rival, w);
  for (int i = 0; i < 1000; ++i) {
    const Strategy s = random_grid_strategy(f, 2, 0.5, rng);
    EXPECT_LE(oracle_profit(s, rival, w), best + 1e-12);
  }
}

TEST(GridBestResponse, AgreesWithSolverProfitFunction) {
  const FleetParams f = make_fleet({2, 2});
  std::mt19937_64 rng(12);
  const ScenarioProfile w = late_peak();
  for (int i = 0; i < 50; ++i) {
    const Strategy s = random_grid_strategy(f, 2, 0.5, rng), r = random_grid_strategy(f, 2, 0.5, rng);
    EXPECT_NEAR(oracle_profit(s, r, w), total_profit(s, r, w), 1e-10);
  }
}

TEST(GridBestResponse, GuardsAgainstHugeGrids) {
  const FleetParams f = make_fleet({50, 50});
  EXPECT_THROW(grid_best_response(f, absent_rival(3, 2), constant_profile(3, 2, 1, 1, 0), 0.01), ValidationError);
}

TEST(GridBestResponse, IsDeterministic) {
  const FleetParams f = make_fleet({2, 2});
  std::mt19937_64 rng(13);
  const Strategy rival = random_grid_strategy(f, 2, 0.5, rng);
  const Strategy a = grid_best_response(f, rival, late_peak(), 0.25);
  const Strategy b = grid_best_response(f, rival, late_peak(), 0.25);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.phi, b.phi);
}

TEST(VerifyEquilibrium, SolverOutputPassesAndPerturbationFails) {
  const FleetParams fa = make_fleet({5, 5}), fb = make_fleet({4, 6});
  const ScenarioProfile w = late_peak();
  SolverConfig cfg;
  cfg.tol = 1e-8;
  cfg.inner_tol = 1e-9;
  cfg.maxiter = 200000;
  const SolveReport rep = solve_ne(make_game(fa, fb, w), cfg);
  ASSERT_TRUE(rep.converged);

  VerifyOptions opts;
  opts.mode = VerifyMode::sampling;
  opts.improvement_tol = 1e-3;
  const VerifyVerdict ok = verify_equilibrium(rep.joint, fa, fb, w, opts);
  EXPECT_TRUE(ok.pass) << ok.improvement_a << ' ' << ok.improvement_b;
  EXPECT_EQ(ok.mode_used, VerifyMode::sampling);

  JointStrategy moved = rep.joint;
  moved.a.u(0, 0) = std::max(0.0, moved.a.u(0, 0) - 5.0);
  moved.a.phi = operating_counts(build_state_matrices(fa), fa.initial_state, moved.a.u);
  const VerifyVerdict bad = verify_equilibrium(moved, fa, fb, w, opts);
  EXPECT_FALSE(bad.pass);
  EXPECT_GT(bad.improvement_a, opts.improvement_tol.value());
  EXPECT_GE(oracle_profit(bad.deviation_a, moved.b, w) - bad.profit_a, bad.improvement_a - 1e-9);
}

TEST(VerifyEquilibrium, IdleFleetsAreNotAnEquilibriumWhenChargingPays) {
  const FleetParams fa = make_fleet({5, 5}), fb = make_fleet({4, 6});
  const ScenarioProfile w = late_peak();
  const JointStrategy idle{zero_dispatch(build_state_matrices(fa), fa.initial_state, 2),
                           zero_dispatch(build_state_matrices(fb), fb.initial_state, 2)};
  for (VerifyMode mode : {VerifyMode::sampling, VerifyMode::grid}) {
    VerifyOptions opts;
    opts.mode = mode;
    const VerifyVerdict v = verify_equilibrium(idle, fa, fb, w, opts);
    EXPECT_FALSE(v.pass);
    EXPECT_GT(v.max_improvement(), 1.0);
  }
}

TEST(VerifyEquilibrium, AutomaticModeFallsBackToSamplingForLargeFleets) {
  const Game g = bundled_game(0, 2);
  const JointStrategy idle{zero_dispatch(g.mats_a, g.fleet_a.initial_state, 2),
                           zero_dispatch(g.mats_b, g.fleet_b.initial_state, 2)};
  VerifyOptions opts;
  opts.random_probes = 10;
  opts.polish_runs = 2;
  EXPECT_EQ(verify_equilibrium(idle, g.fleet_a, g.fleet_b, g.window, opts).mode_used, VerifyMode::sampling);
  const FleetParams small = make_fleet({1, 1});
  const JointStrategy tiny{zero_dispatch(build_state_matrices(small), small.initial_state, 1),
                           zero_dispatch(build_state_matrices(small), small.initial_state, 1)};
  EXPECT_EQ(verify_equilibrium(tiny, small, small, constant_profile(1, 2, 1, 1, 0), opts).mode_used,
            VerifyMode::grid);
}

TEST(VerifyEquilibrium, ThresholdsScaleWithEachCompanysProfit) {
  const FleetParams fa = make_fleet({1, 3}), fb = make_fleet({2, 2});
  const ScenarioProfile w = constant_profile(1, 2, 1000, 4, 0.5);
  const JointStrategy idle{zero_dispatch(build_state_matrices(fa), fa.initial_state, 1),
                           zero_dispatch(build_state_matrices(fb), fb.initial_state, 1)};
  const VerifyVerdict v = verify_equilibrium(idle, fa, fb, w);
  EXPECT_TRUE(v.pass);
  EXPECT_NEAR(v.threshold_a, 1e-3 * 1000.0 * 3.0 / 9.0, 1e-12);
  EXPECT_NEAR(v.threshold_b, 1e-3 * 1000.0 * 2.0 / 9.0, 1e-12);
}

TEST(GroundTruth, SymmetricPlayersGetSymmetricPlans) {
  const FleetParams f = make_fleet({3, 3});
  GroundTruthOptions opts;
  opts.resolution = 0.25;
  const GroundTruth gt = tiny_ne_ground_truth(f, f, late_peak(), opts);
  EXPECT_LE((gt.joint.a.u - gt.joint.b.u).cwiseAbs().maxCoeff(), opts.resolution + 1e-12);
}

TEST(GroundTruth, RandomStartsAgree) {
  const FleetParams fa = make_fleet({5, 5}), fb = make_fleet({4, 6});
  GroundTruthOptions opts;
  opts.resolution = 0.5;
  const GroundTruth base = tiny_ne_ground_truth(fa, fb, late_peak(), opts);
  std::mt19937_64 rng(21);
  for (int i = 0; i < 5; ++i) {
    GroundTruthOptions o = opts;
    o.start = JointStrategy{random_grid_strategy(fa, 2, 0.5, rng), random_grid_strategy(fb, 2, 0.5, rng)};
    const GroundTruth gt = tiny_ne_ground_truth(fa, fb, late_peak(), o);
    EXPECT_LE((gt.joint.a.u - base.joint.a.u).cwiseAbs().maxCoeff(), opts.resolution + 1e-12);
    EXPECT_LE((gt.joint.b.u - base.joint.b.u).cwiseAbs().maxCoeff(), opts.resolution + 1e-12);
  }
}

TEST(GroundTruth, ReportsNonConvergence) {
  const FleetParams fa = make_fleet({5, 5}), fb = make_fleet({4, 6});
  GroundTruthOptions opts;
  opts.resolution = 0.5;
  opts.max_rounds = 1;
  EXPECT_THROW(tiny_ne_ground_truth(fa, fb, late_peak(), opts), ConvergenceError);
}
