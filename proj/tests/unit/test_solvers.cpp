#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "tabail/environments.hpp"
#include "tabail/estimators.hpp"
#include "tabail/solvers.hpp"

using namespace tabail;

namespace {

double ogd_regret_bound(const Dims& d, int T) {
  return 2.0 * d.horizon * std::sqrt(2.0 * d.states * d.actions * T);
}

/// Regret of the reward player against the best fixed w in the box:
/// sum_t <w_t, g_t> + || sum_t g_t ||_1, with sum_t g_t = T (P-bar - target).
double measured_regret(const SolveResult& r, const StepTable& target) {
  double losses = 0.0;
  for (const auto& e : r.trace.entries) losses += e.loss;
  return losses + r.iterations_run * l1_occupancy_distance(r.occupancy, target);
}

StepTable perturbed_occupancy(std::mt19937_64& gen, const StepTable& occ, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  StepTable t = occ;
  for (double& x : t.values()) x = std::max(0.0, x + u(gen));
  return t;
}

}  // namespace

TEST(ProjectLinf, ClampsEntrywise) {
  StepTable w(Dims{1, 3, 1}, 0.0);
  w(0, 0, 0) = 2.5;
  w(0, 0, 1) = -0.3;
  w(0, 0, 2) = -7.0;
  const RewardWeights p = project_linf(w);
  EXPECT_EQ(p(0, 0, 0), 1.0);
  EXPECT_EQ(p(0, 0, 1), -0.3);
  EXPECT_EQ(p(0, 0, 2), -1.0);
  w(0, 0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(project_linf(w), NumericError);
}

TEST(AdaptiveStep, DiameterOverRootAccumulator) {
  const Dims d{4, 2, 5};
  EXPECT_EQ(adaptive_step(0.0, d), 0.0);
  EXPECT_DOUBLE_EQ(adaptive_step(4.0, d), std::sqrt(80.0) / 2.0);
  EXPECT_THROW(adaptive_step(-1.0, d), std::invalid_argument);
}

TEST(Ogd, BudgetArithmetic) { EXPECT_DOUBLE_EQ(ogd_regret_bound(Dims{4, 2, 5}, 100), 400.0); }

TEST(Ogd, SingleIterationIsZeroRewardBestResponse) {
  const auto env = make_standard_imitation(4, 3, 3);
  SolverConfig cfg;
  cfg.iterations = 1;
  const SolveResult r = ogd_saddle_solve(env.mdp, occupancy(env.mdp, env.expert).table(), cfg);
  ASSERT_EQ(r.policy.size(), 1u);
  EXPECT_EQ(r.policy.components()[0], value_iteration(env.mdp, StepTable(env.mdp.dims(), 0.0)).policy);
}

TEST(Ogd, RegretWithinBoundOnRandomInstances) {
  std::mt19937_64 gen(101);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims d = oracle::random_dims(gen, 5, 3, 6, 2);
    const TabularMdp mdp = oracle::random_mdp(gen, d);
    const StepTable target = occupancy(mdp, oracle::random_policy(gen, d)).table();
    SolverConfig cfg;
    cfg.iterations = 100;
    cfg.record_trace = true;
    const SolveResult r = ogd_saddle_solve(mdp, target, cfg);
    ASSERT_EQ(r.trace.size(), 100u);
    EXPECT_LE(measured_regret(r, target), ogd_regret_bound(d, 100)) << "trial " << trial;
  }
}

TEST(Ogd, ReportedOccupancyIsTheMixtureOccupancy) {
  std::mt19937_64 gen(102);
  const Dims d{3, 2, 4};
  const TabularMdp mdp = oracle::random_mdp(gen, d);
  const StepTable target = occupancy(mdp, oracle::random_policy(gen, d)).table();
  SolverConfig cfg;
  cfg.iterations = 60;
  const SolveResult r = ogd_saddle_solve(mdp, target, cfg);
  EXPECT_LE(oracle::max_abs_diff(r.occupancy, mixture_occupancy(mdp, r.policy).table()), 1e-12);
  double w = 0.0;
  for (double x : r.policy.weights()) w += x;
  EXPECT_NEAR(w, 1.0, 1e-12);
}

TEST(Ogd, ApproximateMinimaxBoundWithNoisyTargets) {
  std::mt19937_64 gen(103);
  for (int trial = 0; trial < 20; ++trial) {
    const Dims d = oracle::random_dims(gen, 4, 3, 5, 2);
    const TabularMdp mdp = oracle::random_mdp(gen, d);
    const StepTable expert = occupancy(mdp, oracle::random_policy(gen, d, 0.6)).table();
    const StepTable target = perturbed_occupancy(gen, expert, 0.1);
    SolverConfig cfg;
    cfg.iterations = 150;
    const SolveResult r = ogd_saddle_solve(mdp, target, cfg);
    const double lhs = l1_occupancy_distance(mixture_occupancy(mdp, r.policy).table(), target);
    const double rhs = l1_occupancy_distance(expert, target) +
                       2.0 * d.horizon * std::sqrt(2.0 * d.states * d.actions / cfg.iterations);
    EXPECT_LE(lhs, rhs + 1e-9) << "trial " << trial;
  }
}

TEST(Ogd, FixedStepRuleIsHonoured) {
  const auto env = make_standard_imitation(3, 2, 2);
  SolverConfig cfg;
  cfg.iterations = 5;
  cfg.step_rule = StepRule::fixed;
  cfg.fixed_step = 0.125;
  cfg.record_trace = true;
  const SolveResult r = ogd_saddle_solve(env.mdp, occupancy(env.mdp, env.expert).table(), cfg);
  for (const auto& e : r.trace.entries) EXPECT_EQ(e.step, 0.125);
  cfg.fixed_step = 0.0;
  EXPECT_THROW(ogd_saddle_solve(env.mdp, occupancy(env.mdp, env.expert).table(), cfg), std::invalid_argument);
}

TEST(Ogd, RejectsBadTargets) {
  const auto env = make_standard_imitation(3, 2, 2);
  SolverConfig cfg;
  EXPECT_THROW(ogd_saddle_solve(env.mdp, StepTable(Dims{3, 2, 3}, 0.0), cfg), std::invalid_argument);
  StepTable t(env.mdp.dims(), 0.0);
  t(0, 0, 0) = std::nan("");
  EXPECT_THROW(ogd_saddle_solve(env.mdp, t, cfg), NumericError);
  cfg.iterations = 0;
  EXPECT_THROW(ogd_saddle_solve(env.mdp, StepTable(env.mdp.dims(), 0.0), cfg), std::invalid_argument);
}

TEST(FrankWolfe, ConvergesToAnAchievableTarget) {
  std::mt19937_64 gen(104);
  const Dims d{4, 3, 4};
  const TabularMdp mdp = oracle::random_mdp(gen, d);
  const StepTable target = occupancy(mdp, oracle::random_policy(gen, d)).table();
  SolverConfig cfg;
  cfg.iterations = 4000;  // l1 distance decays roughly like 1/sqrt(k)
  cfg.record_trace = true;
  const SolveResult r = frank_wolfe_solve(mdp, target, cfg);
  EXPECT_LE(l1_occupancy_distance(r.occupancy, target), 0.05);
  EXPECT_LE(oracle::max_abs_diff(r.occupancy, mixture_occupancy(mdp, r.policy).table()), 1e-10);
  // Exact line search never increases the objective.
  for (std::size_t i = 1; i < r.trace.entries.size(); ++i) {
    EXPECT_LE(r.trace.entries[i].loss, r.trace.entries[i - 1].loss + 1e-12);
  }
}

TEST(FrankWolfe, ExactExpertTargetOnStandardImitation) {
  const auto env = make_standard_imitation(6, 3, 4);
  SolverConfig cfg;
  cfg.iterations = 500;
  const SolveResult r = frank_wolfe_solve(env.mdp, occupancy(env.mdp, env.expert).table(), cfg);
  EXPECT_LE(bellman_value(env.mdp, env.expert) - bellman_value(env.mdp, r.policy, env.mdp.rewards()), 0.01);
}

TEST(MultiplicativeWeights, FirstRoundPlaysZeroWeights) {
  const auto env = make_reset_cliff(5, 3, 3, 10);
  SolverConfig cfg;
  cfg.iterations = 1;
  cfg.record_trace = true;
  const SolveResult r = mw_saddle_solve(env.mdp, occupancy(env.mdp, env.expert).table(), cfg);
  EXPECT_EQ(r.policy.components()[0], value_iteration(env.mdp, StepTable(env.mdp.dims(), 0.0)).policy);
  EXPECT_EQ(r.trace.entries[0].weights_hash, hash_table(StepTable(env.mdp.dims(), 0.0)));
}

TEST(MultiplicativeWeights, ApproachesTheExpertOccupancy) {
  const auto env = make_standard_imitation(5, 2, 3);
  const StepTable target = occupancy(env.mdp, env.expert).table();
  SolverConfig cfg;
  cfg.iterations = 2000;
  const SolveResult r = mw_saddle_solve(env.mdp, target, cfg);
  EXPECT_LE(l1_occupancy_distance(r.occupancy, target), 0.25);
}

TEST(MirrorDescent, ZeroStepKeepsThePolicy) {
  std::mt19937_64 gen(105);
  const Dims d{3, 3, 2};
  const Policy pi = oracle::random_policy(gen, d);
  QFunction q{StepTable(d, 0.0)};
  for (double& x : q.table.values()) x = std::uniform_real_distribution<double>(-5, 5)(gen);
  const Policy same = mirror_descent_policy(pi, q, 0.0);
  EXPECT_LE(oracle::max_abs_diff(same.table(), pi.table()), 1e-15);
}

TEST(MirrorDescent, UniformStartGivesSoftmax) {
  const Dims d{1, 3, 1};
  QFunction q{StepTable(d, 0.0)};
  q.table(0, 0, 0) = 1.0;
  q.table(0, 0, 1) = 2.0;
  q.table(0, 0, 2) = 1000.0;  // large values must not overflow
  const Policy out = mirror_descent_policy(Policy::uniform(d), q, 0.5);
  const double z = std::exp(0.5 - 500.0) + std::exp(1.0 - 500.0) + 1.0;
  EXPECT_NEAR(out.prob(0, 0, 2), 1.0 / z, 1e-15);
  EXPECT_NEAR(out.prob(0, 0, 0), std::exp(0.5 - 500.0) / z, 1e-300);
}

TEST(MirrorDescent, KeepsZeroProbabilitiesAtZero) {
  const Dims d{1, 2, 1};
  StepTable t(d, 0.0);
  t(0, 0, 1) = 1.0;
  QFunction q{StepTable(d, 0.0)};
  q.table(0, 0, 0) = 10.0;
  const Policy out = mirror_descent_policy(Policy(t), q, 1.0);
  EXPECT_EQ(out.prob(0, 0, 0), 0.0);
  EXPECT_EQ(out.prob(0, 0, 1), 1.0);
}
