#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "tabail/environments.hpp"
#include "tabail/mdp.hpp"

using namespace tabail;

namespace {

TabularMdp two_state_chain() {
  // s0 -a0-> s0, s0 -a1-> s1, s1 absorbing; reward 1 only for (s1, any).
  const Dims d{2, 2, 3};
  std::vector<double> step = {1, 0, 0, 1, 0, 1, 0, 1};
  std::vector<double> rew = {0, 0, 1, 1};
  return TabularMdp::stationary(d, {1.0, 0.0}, step, rew);
}

}  // namespace

TEST(StepTable, IndexingIsStepMajor) {
  StepTable t(Dims{3, 2, 4}, 0.0);
  EXPECT_EQ(t.index(0, 0, 1), 1u);
  EXPECT_EQ(t.index(0, 1, 0), 2u);
  EXPECT_EQ(t.index(1, 0, 0), 6u);
  t(2, 1, 1) = 5.0;
  EXPECT_EQ(t.row(2, 1)[1], 5.0);
  EXPECT_EQ(t.step_sum(2), 5.0);
}

TEST(TabularMdp, RejectsRowsThatDoNotSumToOne) {
  const Dims d{2, 1, 1};
  EXPECT_THROW(TabularMdp(d, {0.5, 0.5}, {0.7, 0.2, 0.5, 0.5}, StepTable(d, 0.0)), std::invalid_argument);
  EXPECT_THROW(TabularMdp(d, {0.5, 0.6}, {1, 0, 0, 1}, StepTable(d, 0.0)), std::invalid_argument);
}

TEST(TabularMdp, RejectsRewardsOutsideUnitInterval) {
  const Dims d{1, 1, 1};
  EXPECT_THROW(TabularMdp(d, {1.0}, {1.0}, StepTable(d, 1.5)), std::invalid_argument);
  EXPECT_THROW(TabularMdp(d, {1.0}, {1.0}, StepTable(d, -0.1)), std::invalid_argument);
}

TEST(TabularMdp, SuccessorsListOnlyNonzeroEntries) {
  const TabularMdp mdp = two_state_chain();
  auto succ = mdp.successors(0, 0, 1);
  ASSERT_EQ(succ.size(), 1u);
  EXPECT_EQ(succ[0].state, 1);
  EXPECT_EQ(succ[0].prob, 1.0);
}

TEST(Policy, RejectsBadRows) {
  StepTable t(Dims{1, 2, 1}, 0.0);
  t(0, 0, 0) = 0.3;
  EXPECT_THROW(Policy{t}, std::invalid_argument);
  t(0, 0, 1) = 0.7;
  EXPECT_NO_THROW(Policy{t});
  t(0, 0, 1) = -0.7;
  EXPECT_THROW(Policy{t}, std::invalid_argument);
}

TEST(MixtureBuilder, MergesIdenticalComponents) {
  const Dims d{2, 2, 2};
  MixtureBuilder b;
  b.add(Policy::uniform(d), 1.0);
  b.add(Policy::deterministic(d, std::vector<int>{0, 1, 1, 0}), 1.0);
  b.add(Policy::uniform(d), 2.0);
  const MixturePolicy mix = b.build();
  ASSERT_EQ(mix.size(), 2u);
  EXPECT_DOUBLE_EQ(mix.weights()[0], 0.75);
  EXPECT_DOUBLE_EQ(mix.weights()[1], 0.25);
}

TEST(Occupancy, ChainByHand) {
  const TabularMdp mdp = two_state_chain();
  const Policy go = Policy::deterministic(mdp.dims(), std::vector<int>{1, 1, 1, 1, 1, 1});
  const OccupancyMeasure occ = occupancy(mdp, go);
  EXPECT_DOUBLE_EQ(occ(0, 0, 1), 1.0);
  EXPECT_DOUBLE_EQ(occ(1, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(occ(2, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(bellman_value(mdp, go), 2.0);

  const Policy coin = Policy::uniform(mdp.dims());
  const OccupancyMeasure occ2 = occupancy(mdp, coin);
  // Reaching s1 by step h happens with probability 1 - 2^-h.
  EXPECT_DOUBLE_EQ(occ2(1, 1, 0) + occ2(1, 1, 1), 0.5);
  EXPECT_DOUBLE_EQ(occ2(2, 1, 0) + occ2(2, 1, 1), 0.75);
  EXPECT_DOUBLE_EQ(bellman_value(mdp, coin), 1.25);
}

TEST(Occupancy, MatchesPathEnumerationOnRandomInstances) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 60; ++trial) {
    const Dims d = oracle::random_dims(gen, 4, 3, 4);
    const TabularMdp mdp = oracle::random_mdp(gen, d);
    const Policy pi = oracle::random_policy(gen, d);
    const OccupancyMeasure occ = occupancy(mdp, pi);
    EXPECT_LE(oracle::max_abs_diff(occ.table(), oracle::path_occupancy(mdp, pi)), 1e-12)
        << "trial " << trial << " dims " << to_string(d);
    for (int h = 0; h < d.horizon; ++h) EXPECT_NEAR(occ.table().step_sum(h), 1.0, 1e-12);
  }
}

TEST(Occupancy, FlowConservation) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Dims d = oracle::random_dims(gen, 6, 4, 6);
    const TabularMdp mdp = oracle::random_mdp(gen, d);
    const OccupancyMeasure occ = occupancy(mdp, oracle::random_policy(gen, d));
    for (int h = 0; h + 1 < d.horizon; ++h) {
      for (int s2 = 0; s2 < d.states; ++s2) {
        double inflow = 0.0, mass = 0.0;
        for (int s = 0; s < d.states; ++s) {
          for (int a = 0; a < d.actions; ++a) inflow += occ(h, s, a) * mdp.transition(h, s, a, s2);
        }
        for (int a = 0; a < d.actions; ++a) mass += occ(h + 1, s2, a);
        EXPECT_NEAR(inflow, mass, 1e-12);
      }
    }
  }
}

TEST(Values, DualEqualsBellmanEqualsPathValue) {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 60; ++trial) {
    const Dims d = oracle::random_dims(gen, 4, 3, 4);
    const TabularMdp mdp = oracle::random_mdp(gen, d);
    const Policy pi = oracle::random_policy(gen, d);
    const double primal = bellman_value(mdp, pi);
    EXPECT_NEAR(value_dual(occupancy(mdp, pi), mdp.rewards()), primal, 1e-10);
    EXPECT_NEAR(oracle::path_value(mdp, pi, mdp.rewards()), primal, 1e-10);
  }
}

TEST(Values, SignedRewardsAreAllowedForEvaluation) {
  std::mt19937_64 gen(14);
  const Dims d{3, 2, 3};
  const TabularMdp mdp = oracle::random_mdp(gen, d);
  StepTable w(d, 0.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : w.values()) x = u(gen);
  const Policy pi = oracle::random_policy(gen, d);
  EXPECT_NEAR(bellman_value(mdp, pi, w), value_dual(occupancy(mdp, pi), w), 1e-12);
}

TEST(Values, QFunctionAveragesToValue) {
  std::mt19937_64 gen(15);
  const Dims d{4, 3, 5};
  const TabularMdp mdp = oracle::random_mdp(gen, d);
  const Policy pi = oracle::random_policy(gen, d);
  const QFunction q = q_values(mdp, pi, mdp.rewards());
  double v0 = 0.0;
  for (int s = 0; s < d.states; ++s) {
    for (int a = 0; a < d.actions; ++a) v0 += mdp.initial_dist()[s] * pi.prob(0, s, a) * q.table(0, s, a);
  }
  EXPECT_NEAR(v0, bellman_value(mdp, pi), 1e-12);
}

TEST(Values, MixtureValueIsWeightedAverage) {
  std::mt19937_64 gen(16);
  const Dims d{3, 3, 4};
  const TabularMdp mdp = oracle::random_mdp(gen, d);
  const Policy p1 = oracle::random_policy(gen, d), p2 = oracle::random_policy(gen, d);
  const MixturePolicy mix({p1, p2}, {0.3, 0.7});
  EXPECT_NEAR(bellman_value(mdp, mix, mdp.rewards()),
              0.3 * bellman_value(mdp, p1) + 0.7 * bellman_value(mdp, p2), 1e-12);
  const OccupancyMeasure mo = mixture_occupancy(mdp, mix);
  const OccupancyMeasure o1 = occupancy(mdp, p1), o2 = occupancy(mdp, p2);
  for (std::size_t i = 0; i < mo.table().values().size(); ++i) {
    EXPECT_NEAR(mo.table().values()[i], 0.3 * o1.table().values()[i] + 0.7 * o2.table().values()[i], 1e-14);
  }
}

TEST(ValueIteration, MatchesExhaustiveSearch) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 40; ++trial) {
    const Dims d = oracle::random_dims(gen, 3, 2, 3, 2);
    const TabularMdp mdp = oracle::random_mdp(gen, d);
    const OptimalPolicy opt = value_iteration(mdp, mdp.rewards());
    EXPECT_TRUE(opt.policy.is_deterministic());
    EXPECT_NEAR(opt.value, oracle::exhaustive_best_value(mdp, mdp.rewards()), 1e-12);
    EXPECT_NEAR(opt.value, bellman_value(mdp, opt.policy), 1e-12);
  }
}

TEST(ValueIteration, TiesGoToLowestAction) {
  const Dims d{2, 3, 2};
  std::mt19937_64 gen(18);
  const TabularMdp mdp = oracle::random_mdp(gen, d);
  const OptimalPolicy opt = value_iteration(mdp, StepTable(d, 0.0));
  for (int h = 0; h < d.horizon; ++h) {
    for (int s = 0; s < d.states; ++s) EXPECT_EQ(opt.policy.prob(h, s, 0), 1.0);
  }
  EXPECT_EQ(opt.value, 0.0);
}

TEST(ValueIteration, RejectsNonFiniteRewards) {
  const Dims d{1, 2, 1};
  const TabularMdp mdp(d, {1.0}, {1.0, 1.0}, StepTable(d, 0.0));
  StepTable w(d, 0.0);
  w(0, 0, 1) = std::nan("");
  EXPECT_THROW(value_iteration(mdp, w), NumericError);
}

TEST(L1Distance, ZeroOnSelfAndBoundedByTwoH) {
  std::mt19937_64 gen(19);
  const Dims d{4, 3, 5};
  const TabularMdp mdp = oracle::random_mdp(gen, d);
  const OccupancyMeasure a = occupancy(mdp, oracle::random_policy(gen, d));
  const OccupancyMeasure b = occupancy(mdp, oracle::random_policy(gen, d));
  EXPECT_EQ(l1_occupancy_distance(a, a), 0.0);
  const double dist = l1_occupancy_distance(a, b);
  EXPECT_GE(dist, 0.0);
  EXPECT_LE(dist, 2.0 * d.horizon + 1e-12);
  EXPECT_DOUBLE_EQ(dist, l1_occupancy_distance(b, a));
}

TEST(Shapes, MismatchedInputsAreRejected) {
  const auto env = make_standard_imitation(3, 2, 2);
  const Policy wrong = Policy::uniform(Dims{3, 2, 3});
  EXPECT_THROW(occupancy(env.mdp, wrong), std::invalid_argument);
  EXPECT_THROW(value_iteration(env.mdp, StepTable(Dims{3, 3, 2}, 0.0)), std::invalid_argument);
  EXPECT_THROW(l1_occupancy_distance(StepTable(Dims{1, 1, 1}, 0.0), StepTable(Dims{1, 1, 2}, 0.0)),
               std::invalid_argument);
}
