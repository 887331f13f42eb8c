#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "support/oracles.hpp"
#include "tabail/environments.hpp"
#include "tabail/trajectories.hpp"

using namespace tabail;

TEST(Rng, DerivedStreamsAreIndependentOfCallOrder) {
  RngStream root(42);
  RngStream a = root.derive("alpha");
  const std::uint64_t first = a.next();
  RngStream b = root.derive("beta");
  (void)b.next();
  EXPECT_EQ(RngStream(42).derive("alpha").next(), first);
  EXPECT_NE(RngStream(42).derive("beta").next(), first);
  EXPECT_NE(RngStream(43).derive("alpha").next(), first);
}

TEST(Rng, BelowAndCategoricalStayInRange) {
  RngStream r(7);
  std::vector<int> counts(3, 0);
  const std::vector<double> p = {0.2, 0.0, 0.8};
  for (int i = 0; i < 20000; ++i) {
    EXPECT_LT(r.below(5), 5u);
    ++counts[r.categorical(p)];
  }
  EXPECT_EQ(counts[1], 0);
  EXPECT_NEAR(counts[0] / 20000.0, 0.2, 0.015);
}

TEST(Sampling, TrajectoriesHaveLengthHAndFollowTheExpert) {
  const auto env = make_reset_cliff(6, 3, 7, 50);
  RngStream rng(3);
  const Dataset d = sample_trajectories(env.mdp, env.expert, 200, rng);
  ASSERT_EQ(d.size(), 200u);
  EXPECT_EQ(d.source, DataSource::expert);
  for (const auto& tr : d.trajectories) {
    ASSERT_EQ(tr.length(), 7);
    for (const auto& [s, a] : tr.steps) {
      EXPECT_EQ(a, 0);
      EXPECT_NE(s, 5);  // the expert never reaches the bad state
    }
  }
  EXPECT_NO_THROW(d.validate(env.mdp.dims()));
}

TEST(Sampling, SameSeedSameData) {
  const auto env = make_standard_imitation(10, 3, 5);
  RngStream r1(9), r2(9);
  EXPECT_EQ(sample_trajectories(env.mdp, env.expert, 50, r1).trajectories,
            sample_trajectories(env.mdp, env.expert, 50, r2).trajectories);
}

TEST(Sampling, EmpiricalFrequenciesConvergeToOccupancy) {
  std::mt19937_64 gen(5);
  const Dims d{3, 2, 3};
  const TabularMdp mdp = oracle::random_mdp(gen, d);
  const Policy pi = oracle::random_policy(gen, d);
  RngStream rng(5);
  const int n = 40000;
  const Dataset data = sample_trajectories(mdp, pi, n, rng, DataSource::rollout);
  StepTable freq(d, 0.0);
  for (const auto& tr : data.trajectories) {
    for (int h = 0; h < d.horizon; ++h) freq(h, tr.steps[h].state, tr.steps[h].action) += 1.0 / n;
  }
  const StepTable truth = occupancy(mdp, pi).table();
  for (std::size_t i = 0; i < truth.values().size(); ++i) {
    const double p = truth.values()[i];
    EXPECT_NEAR(freq.values()[i], p, 5.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
  }
}

TEST(Sampling, MixtureDrawsAComponentPerTrajectory) {
  const auto env = make_standard_imitation(4, 2, 3);
  const Dims d = env.mdp.dims();
  const Policy zero = Policy::deterministic(d, std::vector<int>(12, 0));
  const Policy one = Policy::deterministic(d, std::vector<int>(12, 1));
  const MixturePolicy mix({zero, one}, {0.25, 0.75});
  RngStream rng(1);
  const Dataset data = sample_trajectories(env.mdp, mix, 8000, rng);
  int ones = 0;
  for (const auto& tr : data.trajectories) {
    // Actions never change inside a trajectory.
    for (const auto& st : tr.steps) EXPECT_EQ(st.action, tr.steps.front().action);
    ones += tr.steps.front().action;
  }
  EXPECT_NEAR(ones / 8000.0, 0.75, 0.025);
}

TEST(Split, PartitionsWithExtraInFirstHalf) {
  const auto env = make_standard_imitation(20, 3, 2);
  RngStream rng(2);
  const Dataset d = sample_trajectories(env.mdp, env.expert, 7, rng);
  const SplitDataset sp = split_dataset(d, rng);
  EXPECT_EQ(sp.d1.size(), 4u);
  EXPECT_EQ(sp.d1c.size(), 3u);
  std::multiset<std::vector<int>> all, parts;
  auto key = [](const Trajectory& tr) {
    std::vector<int> k;
    for (auto [s, a] : tr.steps) k.insert(k.end(), {s, a});
    return k;
  };
  for (const auto& tr : d.trajectories) all.insert(key(tr));
  for (const auto& tr : sp.d1.trajectories) parts.insert(key(tr));
  for (const auto& tr : sp.d1c.trajectories) parts.insert(key(tr));
  EXPECT_EQ(all, parts);
  Dataset one;
  one.trajectories.push_back(d.trajectories.front());
  EXPECT_THROW(split_dataset(one, rng), std::invalid_argument);
}

TEST(Split, EveryTrajectoryLandsInEitherHalfEvenly) {
  Dataset d;
  for (int i = 0; i < 4; ++i) d.trajectories.push_back({{{i, 0}}});
  RngStream rng(8);
  std::vector<int> in_first(4, 0);
  for (int rep = 0; rep < 4000; ++rep) {
    const SplitDataset sp = split_dataset(d, rng);
    for (const auto& tr : sp.d1.trajectories) ++in_first[tr.steps[0].state];
  }
  for (int c : in_first) EXPECT_NEAR(c / 4000.0, 0.5, 0.04);
}

TEST(PrefixIndex, KnownPrefixAndBcPolicy) {
  Dataset d1;
  d1.trajectories.push_back({{{0, 1}, {2, 0}, {1, 1}}});
  d1.trajectories.push_back({{{1, 0}, {2, 0}, {0, 1}}});
  const PrefixIndex idx = build_prefix_index(d1, 3, 3);
  EXPECT_TRUE(idx.seen(0, 0));
  EXPECT_TRUE(idx.seen(0, 1));
  EXPECT_FALSE(idx.seen(0, 2));
  EXPECT_EQ(idx.count_seen(1), 1u);
  EXPECT_EQ(idx.seen_action(2, 0), 1);

  const Trajectory tr{{{0, 1}, {2, 0}, {2, 1}}};
  EXPECT_TRUE(is_known_prefix(idx, tr, 0));
  EXPECT_TRUE(is_known_prefix(idx, tr, 1));
  EXPECT_FALSE(is_known_prefix(idx, tr, 2));
  const Trajectory late{{{2, 0}, {2, 0}, {0, 1}}};
  EXPECT_FALSE(is_known_prefix(idx, late, 2));  // one unseen state anywhere breaks the prefix
  EXPECT_THROW(is_known_prefix(idx, tr, 3), std::invalid_argument);

  const Policy bc = bc_policy(idx, 3, 2, 3);
  EXPECT_EQ(bc.prob(0, 0, 1), 1.0);
  EXPECT_EQ(bc.prob(1, 2, 0), 1.0);
  EXPECT_EQ(bc.prob(0, 2, 0), 0.5);
  EXPECT_EQ(bc.prob(1, 0, 1), 0.5);
}

TEST(PrefixIndex, ConflictingActionsAreADataError) {
  Dataset d1;
  d1.trajectories.push_back({{{0, 1}}});
  d1.trajectories.push_back({{{0, 0}}});
  EXPECT_THROW(build_prefix_index(d1, 2, 1), DataError);
}

TEST(PrefixIndex, EmptyFirstHalfGivesEmptyIndex) {
  const PrefixIndex idx = build_prefix_index(Dataset{}, 4, 3);
  for (int h = 0; h < 3; ++h) EXPECT_EQ(idx.count_seen(h), 0u);
  EXPECT_EQ(bc_policy(idx, 4, 2, 3), Policy::uniform(Dims{4, 2, 3}));
}
