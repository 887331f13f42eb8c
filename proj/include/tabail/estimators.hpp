#pragma once

#include <string>
#include <vector>

#include "tabail/mdp.hpp"
#include "tabail/trajectories.hpp"

namespace tabail {

enum class EstimateKind { mle, split_known, split_unknown };

inline const char* to_string(EstimateKind k) {
  switch (k) {
    case EstimateKind::mle: return "mle";
    case EstimateKind::split_known: return "split_known";
    case EstimateKind::split_unknown: return "split_unknown";
  }
  return "?";
}

/// Estimate of the expert's per-step state-action distribution.
///
/// Split estimates are not renormalized: each step carries the exact-part
/// mass plus the empirical remainder, which is unbiased but may total
/// anything in [0, 2].
struct OccupancyEstimate {
  StepTable table;
  EstimateKind kind;

  const Dims& dims() const { return table.dims(); }
};

namespace detail {
/// Adds weight * #{tr : (s_h, a_h) = (s, a) and known(tr, h) == want_known} to `out`.
inline void add_counts(const Dataset& d, const PrefixIndex* idx, bool want_known, double weight,
                       StepTable& out) {
  const int horizon = out.dims().horizon;
  for (const auto& tr : d.trajectories) {
    require(tr.length() == horizon, "estimator: trajectory length differs from horizon");
    // Known-prefix status is monotone in h, so track it incrementally.
    bool known = idx != nullptr;
    for (int h = 0; h < horizon; ++h) {
      const auto [s, a] = tr.steps[h];
      if (idx) known = known && idx->seen(h, s);
      if (idx == nullptr || known == want_known) out(h, s, a) += weight;
    }
  }
}
}  // namespace detail

/// Empirical per-step frequencies of (s_h, a_h).
inline OccupancyEstimate mle_estimate(const Dataset& d, const Dims& dims) {
  detail::require(!d.empty(), "mle_estimate: empty dataset");
  d.validate(dims);
  StepTable t(dims, 0.0);
  detail::add_counts(d, nullptr, false, 1.0 / static_cast<double>(d.size()), t);
  return {std::move(t), EstimateKind::mle};
}

/// Exact mass of known prefixes under Pi_BC(D1), by forward recursion over
/// seen states only.
inline StepTable known_prefix_mass(const TabularMdp& mdp, const PrefixIndex& idx) {
  const Dims& d = mdp.dims();
  detail::require(idx.num_states() == d.states && idx.horizon() == d.horizon,
                  "known_prefix_mass: index shape mismatch");
  StepTable out(d, 0.0);
  std::vector<double> q(d.states, 0.0), next(d.states);
  for (int s = 0; s < d.states; ++s) q[s] = idx.seen(0, s) ? mdp.initial_dist()[s] : 0.0;
  for (int h = 0; h < d.horizon; ++h) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < d.states; ++s) {
      if (q[s] == 0.0) continue;
      const int a = idx.seen_action(h, s);
      detail::require(a >= 0 && a < d.actions, "known_prefix_mass: recorded action out of range");
      out(h, s, a) = q[s];
      if (h + 1 < d.horizon) {
        for (const auto& [s2, p] : mdp.successors(h, s, a)) {
          if (idx.seen(h + 1, s2)) next[s2] += q[s] * p;
        }
      }
    }
    q.swap(next);
  }
  return out;
}

/// Split estimator with known transitions: exact known-prefix mass from D1
/// plus the D1^c frequency of pairs reached through an unknown prefix.
inline OccupancyEstimate split_estimate_known(const TabularMdp& mdp, const SplitDataset& split) {
  detail::require(!split.d1c.empty(), "split_estimate_known: D1^c is empty");
  split.d1.validate(mdp.dims());
  split.d1c.validate(mdp.dims());
  const PrefixIndex idx = build_prefix_index(split.d1, mdp.num_states(), mdp.horizon());
  StepTable t = known_prefix_mass(mdp, idx);
  detail::add_counts(split.d1c, &idx, false, 1.0 / static_cast<double>(split.d1c.size()), t);
  return {std::move(t), EstimateKind::split_known};
}

/// Split estimator with unknown transitions: the known-prefix part is a Monte
/// Carlo average over rollouts of a policy in Pi_BC(D1).
inline OccupancyEstimate split_estimate_unknown(const SplitDataset& split, const Dataset& rollouts,
                                                const PrefixIndex& idx, int num_actions) {
  detail::require(!rollouts.empty(), "split_estimate_unknown: no rollouts");
  detail::require(!split.d1c.empty(), "split_estimate_unknown: D1^c is empty");
  const Dims d{idx.num_states(), num_actions, idx.horizon()};
  rollouts.validate(d);
  split.d1c.validate(d);
  StepTable t(d, 0.0);
  detail::add_counts(rollouts, &idx, true, 1.0 / static_cast<double>(rollouts.size()), t);
  detail::add_counts(split.d1c, &idx, false, 1.0 / static_cast<double>(split.d1c.size()), t);
  return {std::move(t), EstimateKind::split_unknown};
}

inline double l1_estimation_error(const OccupancyEstimate& est, const OccupancyMeasure& truth) {
  return l1_occupancy_distance(est.table, truth.table());
}

}  // namespace tabail
