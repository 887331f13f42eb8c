#pragma once

// Imitation drivers. Each composes an expert-distribution estimator with a
// reward-player solver and scores the output on the true environment by
// exact Bellman evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "tabail/environments.hpp"
#include "tabail/estimators.hpp"
#include "tabail/model.hpp"
#include "tabail/solvers.hpp"
#include "tabail/trajectories.hpp"

namespace tabail {

struct ImitationResult {
  MixturePolicy policy;
  double value_gap = 0.0;       // V^E - V^pi under the environment rewards
  double expert_value = 0.0;
  double learner_value = 0.0;
  double occupancy_gap = 0.0;   // sum_h ||P^E_h - P^pi_h||_1 on the true environment
  std::optional<double> target_error;  // sum_h ||P^E_h - target_h||_1, when a target was built
  std::int64_t expert_trajectories = 0;
  std::int64_t interactions = 0;
  int iterations = 0;
  std::optional<SolverTrace> trace;
  std::optional<OccupancyEstimate> target;
};

/// Fills the value and occupancy scores of `result` for `policy` on `env`.
inline ImitationResult evaluate_on_env(const EnvBundle& env, MixturePolicy policy) {
  ImitationResult r{std::move(policy), 0.0, 0.0, 0.0, 0.0, std::nullopt, 0, 0, 0, std::nullopt, std::nullopt};
  r.expert_value = bellman_value(env.mdp, env.expert);
  r.learner_value = bellman_value(env.mdp, r.policy, env.mdp.rewards());
  r.value_gap = r.expert_value - r.learner_value;
  r.occupancy_gap = l1_occupancy_distance(occupancy(env.mdp, env.expert), mixture_occupancy(env.mdp, r.policy));
  return r;
}

namespace detail {
inline ImitationResult finish(const EnvBundle& env, SolveResult solved, OccupancyEstimate target,
                              std::int64_t m, std::int64_t interactions, bool keep_trace) {
  ImitationResult r = evaluate_on_env(env, std::move(solved.policy));
  r.target_error = l1_occupancy_distance(occupancy(env.mdp, env.expert).table(), target.table);
  r.expert_trajectories = m;
  r.interactions = interactions;
  r.iterations = solved.iterations_run;
  if (keep_trace) r.trace = std::move(solved.trace);
  r.target = std::move(target);
  return r;
}
}  // namespace detail

/// Behavioral cloning: the recorded action on every (h, s) seen in `d`, uniform elsewhere.
inline ImitationResult run_bc(const EnvBundle& env, const Dataset& d) {
  detail::require(!d.empty(), "run_bc: empty dataset");
  d.validate(env.mdp.dims());
  const PrefixIndex idx = build_prefix_index(d, env.mdp.num_states(), env.mdp.horizon());
  ImitationResult r = evaluate_on_env(
      env, MixturePolicy(bc_policy(idx, env.mdp.num_states(), env.mdp.num_actions(), env.mdp.horizon())));
  r.expert_trajectories = static_cast<std::int64_t>(d.size());
  return r;
}

/// Vanilla AIL: count estimate + OGD with the true transitions.
inline ImitationResult run_vail(const EnvBundle& env, const Dataset& d, const SolverConfig& cfg) {
  OccupancyEstimate target = mle_estimate(d, env.mdp.dims());
  SolveResult solved = ogd_saddle_solve(env.mdp, target.table, cfg);
  return detail::finish(env, std::move(solved), std::move(target), static_cast<std::int64_t>(d.size()), 0,
                        cfg.record_trace);
}

/// Transition-aware AIL: split estimate with known transitions + OGD.
inline ImitationResult run_tail(const EnvBundle& env, const Dataset& d, const SolverConfig& cfg, RngStream& rng) {
  detail::require(d.size() >= 2, "run_tail: need at least 2 expert trajectories");
  const SplitDataset split = split_dataset(d, rng);
  OccupancyEstimate target = split_estimate_known(env.mdp, split);
  SolveResult solved = ogd_saddle_solve(env.mdp, target.table, cfg);
  return detail::finish(env, std::move(solved), std::move(target), static_cast<std::int64_t>(d.size()), 0,
                        cfg.record_trace);
}

/// Feature expectation matching: count estimate + Frank-Wolfe.
inline ImitationResult run_fem(const EnvBundle& env, const Dataset& d, const SolverConfig& cfg) {
  OccupancyEstimate target = mle_estimate(d, env.mdp.dims());
  SolveResult solved = frank_wolfe_solve(env.mdp, target.table, cfg);
  return detail::finish(env, std::move(solved), std::move(target), static_cast<std::int64_t>(d.size()), 0,
                        cfg.record_trace);
}

/// Game-theoretic apprenticeship learning: count estimate + multiplicative weights.
inline ImitationResult run_gtal(const EnvBundle& env, const Dataset& d, const SolverConfig& cfg) {
  OccupancyEstimate target = mle_estimate(d, env.mdp.dims());
  SolveResult solved = mw_saddle_solve(env.mdp, target.table, cfg);
  return detail::finish(env, std::move(solved), std::move(target), static_cast<std::int64_t>(d.size()), 0,
                        cfg.record_trace);
}

inline constexpr double kDiscriminatorFloor = 1e-8;

/// Closed-form discriminator D = occ / (occ + target), clamped to
/// [1e-8, 1 - 1e-8]. A pair with no mass on either side is treated as
/// learner-only (upper clamp).
inline StepTable gail_discriminator(const StepTable& occ, const StepTable& target) {
  require_same_shape(occ, target, "gail_discriminator");
  StepTable out(occ.dims(), 0.0);
  auto o = occ.values();
  auto t = target.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double denom = o[i] + t[i];
    const double raw = denom > 0.0 ? o[i] / denom : 1.0;
    out.values()[i] = std::clamp(raw, kDiscriminatorFloor, 1.0 - kDiscriminatorFloor);
  }
  return out;
}

/// Default mirror-descent step sqrt(2 ln|A| / (H^2 T)).
inline double default_md_step(const Dims& d, int rounds) {
  return std::sqrt(2.0 * std::log(static_cast<double>(d.actions)) /
                   (static_cast<double>(d.horizon) * d.horizon * rounds));
}

/// GAIL variant with the closed-form inner maximization and a mirror-descent policy player.
inline ImitationResult run_gail(const EnvBundle& env, const Dataset& d, const SolverConfig& cfg,
                                std::optional<double> eta = std::nullopt) {
  cfg.validate();
  const Dims& dims = env.mdp.dims();
  const double step = eta.value_or(default_md_step(dims, cfg.iterations));
  detail::require(step > 0.0, "run_gail: eta must be positive");
  OccupancyEstimate target = mle_estimate(d, dims);
  Policy pi = Policy::uniform(dims);
  MixtureBuilder mix;
  SolverTrace trace;
  StepTable reward(dims, 0.0);
  StepTable occ_sum(dims, 0.0);
  for (int t = 1; t <= cfg.iterations; ++t) {
    mix.add(pi, 1.0);
    const OccupancyMeasure occ = occupancy(env.mdp, pi);
    const StepTable disc = gail_discriminator(occ.table(), target.table);
    double objective = 0.0;
    for (std::size_t i = 0; i < reward.values().size(); ++i) {
      const double dv = disc.values()[i];
      reward.values()[i] = -std::log(dv);
      objective += target.table.values()[i] * std::log(1.0 - dv) + occ.table().values()[i] * std::log(dv);
      occ_sum.values()[i] += occ.table().values()[i];
    }
    const QFunction q = q_values(env.mdp, pi, reward);
    if (cfg.record_trace) {
      double qn = 0.0;
      for (double x : q.table.values()) qn += x * x;
      trace.entries.push_back({t, hash_table(reward), objective, std::sqrt(qn), value_dual(occ, reward), step});
    }
    pi = mirror_descent_policy(pi, q, step);
  }
  SolveResult solved{mix.build(), std::move(trace), detail::uniform_mixture_occupancy(std::move(occ_sum), cfg.iterations),
                     cfg.iterations};
  return detail::finish(env, std::move(solved), std::move(target), static_cast<std::int64_t>(d.size()), 0,
                        cfg.record_trace);
}

struct OalOptions {
  std::optional<double> policy_step;  // defaults to sqrt(2 ln|A| / (H^2 K))
  double delta = kDefaultDelta;
  bool record_trace = false;
};

/// Online apprenticeship learning: an OGD reward player and an optimistic
/// mirror-descent policy player, both planning in the empirical model built
/// from the learner's own episodes. Consumes exactly `episodes` interactions.
inline ImitationResult run_oal(const EnvBundle& env, const Dataset& d, std::int64_t episodes, RngStream& rng,
                               const OalOptions& opts = {}) {
  detail::require(episodes >= 1, "run_oal: need at least one episode");
  const Dims& dims = env.mdp.dims();
  OccupancyEstimate target = mle_estimate(d, dims);
  const double eta_pi = opts.policy_step.value_or(default_md_step(dims, static_cast<int>(episodes)));
  const double log_term = confidence_log(dims, episodes, opts.delta);
  EpisodeSimulator sim(env.mdp, episodes);
  EmpiricalModel model(dims);
  Policy pi = Policy::uniform(dims);
  StepTable w(dims, 0.0);
  StepTable reward(dims, 0.0);
  MixtureBuilder mix;
  SolverTrace trace;
  double accum = 0.0;
  for (std::int64_t k = 1; k <= episodes; ++k) {
    const StepTable occ = model.occupancy(pi);
    double loss = 0.0, gn2 = 0.0;
    std::vector<double> grad(occ.values().size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] = occ.values()[i] - target.table.values()[i];
      loss += w.values()[i] * grad[i];
      gn2 += grad[i] * grad[i];
    }
    accum += gn2;
    const double eta_w = adaptive_step(accum, dims);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      w.values()[i] = std::clamp(w.values()[i] - eta_w * grad[i], -1.0, 1.0);
    }
    for (int h = 0; h < dims.horizon; ++h) {
      for (int s = 0; s < dims.states; ++s) {
        for (int a = 0; a < dims.actions; ++a) {
          const double n = static_cast<double>(std::max<std::int64_t>(model.visits(h, s, a), 1));
          reward(h, s, a) = w(h, s, a) + std::sqrt(log_term / n);
        }
      }
    }
    const QFunction q = model.q_values(pi, reward);
    pi = mirror_descent_policy(pi, q, eta_pi);
    if (opts.record_trace) {
      trace.entries.push_back({static_cast<int>(k), hash_table(w), loss, std::sqrt(gn2), 0.0, eta_w});
    }
    mix.add(pi, 1.0);
    model.record(sim.run_policy(pi, rng));
  }
  ImitationResult r = evaluate_on_env(env, mix.build());
  r.target_error = l1_occupancy_distance(occupancy(env.mdp, env.expert).table(), target.table);
  r.expert_trajectories = static_cast<std::int64_t>(d.size());
  r.interactions = sim.used();
  r.iterations = static_cast<int>(episodes);
  if (opts.record_trace) r.trace = std::move(trace);
  r.target = std::move(target);
  return r;
}

struct MbTailOptions {
  double delta = kDefaultDelta;
  /// Test hooks: plan in this model instead of the explored one, and/or
  /// match this target instead of the split estimate. Budget is still spent.
  std::optional<TabularMdp> model_override;
  std::optional<StepTable> target_override;
};

/// Model-based TAIL: half the budget rolls out a policy in Pi_BC(D1) for the
/// unknown-transition split estimate, the other half runs reward-free
/// exploration; OGD then plans entirely in the empirical model.
inline ImitationResult run_mbtail(const EnvBundle& env, const Dataset& d, std::int64_t interaction_budget,
                                  const SolverConfig& cfg, RngStream& rng, const MbTailOptions& opts = {}) {
  detail::require(d.size() >= 2, "run_mbtail: need at least 2 expert trajectories");
  detail::require(interaction_budget >= 2, "run_mbtail: interaction budget must be >= 2");
  const Dims& dims = env.mdp.dims();
  d.validate(dims);
  RngStream split_rng = rng.derive("split");
  RngStream estimate_rng = rng.derive("estimate");
  RngStream explore_rng = rng.derive("explore");
  const SplitDataset split = split_dataset(d, split_rng);
  const PrefixIndex idx = build_prefix_index(split.d1, dims.states, dims.horizon);
  const Policy bc = bc_policy(idx, dims.states, dims.actions, dims.horizon);

  EpisodeSimulator sim(env.mdp, interaction_budget);
  const std::int64_t estimate_episodes = interaction_budget / 2;
  const std::int64_t explore_episodes = interaction_budget - estimate_episodes;
  const Dataset rollouts = sim.collect(bc, estimate_episodes, estimate_rng);
  const EmpiricalModel model = reward_free_explore(sim, explore_episodes, explore_rng, opts.delta);

  OccupancyEstimate target = split_estimate_unknown(split, rollouts, idx, dims.actions);
  if (opts.target_override) target = {*opts.target_override, EstimateKind::split_unknown};
  const TabularMdp planning = opts.model_override ? *opts.model_override : model.to_mdp();
  SolveResult solved = ogd_saddle_solve(planning, target.table, cfg);
  return detail::finish(env, std::move(solved), std::move(target), static_cast<std::int64_t>(d.size()),
                        sim.used(), cfg.record_trace);
}

}  // namespace tabail
