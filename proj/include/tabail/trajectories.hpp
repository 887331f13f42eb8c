#pragma once

#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "tabail/mdp.hpp"
#include "tabail/rng.hpp"

namespace tabail {

struct StateAction {
  int state;
  int action;
  friend bool operator==(const StateAction&, const StateAction&) = default;
};

/// One episode: exactly H (state, action) pairs.
struct Trajectory {
  std::vector<StateAction> steps;

  int length() const { return static_cast<int>(steps.size()); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class DataSource { expert, rollout };

inline const char* to_string(DataSource s) { return s == DataSource::expert ? "expert" : "rollout"; }

struct Dataset {
  std::vector<Trajectory> trajectories;
  DataSource source = DataSource::expert;

  std::size_t size() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }

  /// Throws unless every trajectory has length H with indices inside `dims`.
  void validate(const Dims& dims) const {
    for (const auto& tr : trajectories) {
      detail::require(tr.length() == dims.horizon, "Dataset: trajectory length differs from horizon");
      for (const auto& [s, a] : tr.steps) {
        detail::require(s >= 0 && s < dims.states && a >= 0 && a < dims.actions,
                        "Dataset: state or action index out of range");
      }
    }
  }
};

struct SplitDataset {
  Dataset d1;
  Dataset d1c;
};

namespace detail {
inline int sample_next_state(const TabularMdp& mdp, int h, int s, int a, RngStream& rng) {
  auto succ = mdp.successors(h, s, a);
  if (succ.size() == 1) return succ.front().state;
  const double u = rng.uniform();
  double cum = 0.0;
  for (const auto& [s2, p] : succ) {
    cum += p;
    if (u < cum) return s2;
  }
  return succ.back().state;
}

inline Trajectory rollout(const TabularMdp& mdp, const Policy& policy, RngStream& rng) {
  const Dims& d = mdp.dims();
  Trajectory tr;
  tr.steps.reserve(d.horizon);
  int s = static_cast<int>(rng.categorical(mdp.initial_dist()));
  for (int h = 0; h < d.horizon; ++h) {
    const int a = static_cast<int>(rng.categorical(policy.row(h, s)));
    tr.steps.push_back({s, a});
    if (h + 1 < d.horizon) s = sample_next_state(mdp, h, s, a, rng);
  }
  return tr;
}
}  // namespace detail

/// i.i.d. episodes: s_1 ~ rho, a_h ~ pi_h(.|s_h), s_{h+1} ~ P_h(.|s_h, a_h).
inline Dataset sample_trajectories(const TabularMdp& mdp, const Policy& policy, std::size_t count,
                                   RngStream& rng, DataSource source = DataSource::expert) {
  detail::require_policy_fits(mdp, policy.dims(), "sample_trajectories");
  Dataset out{{}, source};
  out.trajectories.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.trajectories.push_back(detail::rollout(mdp, policy, rng));
  return out;
}

/// For a mixture a fresh component is drawn for every trajectory.
inline Dataset sample_trajectories(const TabularMdp& mdp, const MixturePolicy& mix, std::size_t count,
                                   RngStream& rng, DataSource source = DataSource::rollout) {
  detail::require_policy_fits(mdp, mix.dims(), "sample_trajectories");
  Dataset out{{}, source};
  out.trajectories.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = mix.size() == 1 ? 0 : rng.categorical(mix.weights());
    out.trajectories.push_back(detail::rollout(mdp, mix.components()[c], rng));
  }
  return out;
}

/// Uniform random partition into halves; d1 receives the extra trajectory when |d| is odd.
inline SplitDataset split_dataset(const Dataset& d, RngStream& rng) {
  detail::require(d.size() >= 2, "split_dataset: need at least 2 trajectories, got " + std::to_string(d.size()));
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Fisher-Yates with our own integer draws; std::shuffle is not portable.
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  const std::size_t n1 = (d.size() + 1) / 2;
  SplitDataset out{{{}, d.source}, {{}, d.source}};
  out.d1.trajectories.reserve(n1);
  out.d1c.trajectories.reserve(d.size() - n1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n1 ? out.d1 : out.d1c).trajectories.push_back(d.trajectories[order[i]]);
  }
  return out;
}

/// States observed at each step of D1, with the action recorded there.
class PrefixIndex {
 public:
  static constexpr int kUnseen = -1;

  PrefixIndex(int num_states, int horizon)
      : num_states_(num_states), horizon_(horizon),
        action_(static_cast<std::size_t>(num_states) * horizon, kUnseen) {}

  int num_states() const { return num_states_; }
  int horizon() const { return horizon_; }

  bool seen(int h, int s) const { return action_[slot(h, s)] != kUnseen; }
  /// Recorded action at (h, s), or kUnseen.
  int seen_action(int h, int s) const { return action_[slot(h, s)]; }

  std::size_t count_seen(int h) const {
    std::size_t n = 0;
    for (int s = 0; s < num_states_; ++s) n += seen(h, s) ? 1 : 0;
    return n;
  }

  /// Records an observation; throws DataError when (h, s) already holds a different action.
  void record(int h, int s, int a) {
    int& slot_action = action_[slot(h, s)];
    if (slot_action != kUnseen && slot_action != a) {
      throw DataError("non-deterministic expert: step " + std::to_string(h) + ", state " +
                      std::to_string(s) + " has actions " + std::to_string(slot_action) + " and " +
                      std::to_string(a));
    }
    slot_action = a;
  }

 private:
  std::size_t slot(int h, int s) const { return static_cast<std::size_t>(h) * num_states_ + s; }

  int num_states_;
  int horizon_;
  std::vector<int> action_;
};

/// S_h(D1) and the recorded action at each seen (h, s). An empty D1 gives an empty index.
inline PrefixIndex build_prefix_index(const Dataset& d1, int num_states, int horizon) {
  PrefixIndex idx(num_states, horizon);
  for (const auto& tr : d1.trajectories) {
    detail::require(tr.length() == horizon, "build_prefix_index: trajectory length differs from horizon");
    for (int h = 0; h < horizon; ++h) {
      const auto [s, a] = tr.steps[h];
      detail::require(s >= 0 && s < num_states, "build_prefix_index: state out of range");
      idx.record(h, s, a);
    }
  }
  return idx;
}

/// True iff the states at steps 0..step were all observed at their step in D1.
inline bool is_known_prefix(const PrefixIndex& idx, const Trajectory& tr, int step) {
  detail::require(step >= 0 && step < idx.horizon() && step < tr.length(),
                  "is_known_prefix: step out of range");
  for (int l = 0; l <= step; ++l) {
    if (!idx.seen(l, tr.steps[l].state)) return false;
  }
  return true;
}

/// The member of Pi_BC(D1) that is uniform on every unseen (h, s).
inline Policy bc_policy(const PrefixIndex& idx, int num_states, int num_actions, int horizon) {
  detail::require(idx.num_states() == num_states && idx.horizon() == horizon,
                  "bc_policy: index shape mismatch");
  const Dims d{num_states, num_actions, horizon};
  StepTable t(d, 0.0);
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < num_states; ++s) {
      const int a = idx.seen_action(h, s);
      if (a == PrefixIndex::kUnseen) {
        for (double& x : t.row(h, s)) x = 1.0 / num_actions;
      } else {
        detail::require(a < num_actions, "bc_policy: recorded action out of range");
        t(h, s, a) = 1.0;
      }
    }
  }
  return Policy(std::move(t));
}

}  // namespace tabail
