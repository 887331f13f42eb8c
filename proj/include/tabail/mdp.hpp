#pragma once

// Finite-horizon tabular MDPs, policies and occupancy measures.
//
// Steps are indexed 0..H-1 throughout. Every per-step quantity is stored as
// a dense H x S x A table (StepTable); transitions are dense H x S x A x S
// with a compressed successor index built once at construction so that the
// backward and forward recursions only touch non-zero entries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tabail/errors.hpp"

namespace tabail {

inline constexpr double kConstructionTol = 1e-12;
inline constexpr double kArithmeticTol = 1e-10;

namespace detail {
inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}
inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace detail

struct Dims {
  int states = 0;
  int actions = 0;
  int horizon = 0;

  std::size_t step_size() const { return static_cast<std::size_t>(states) * actions; }
  std::size_t table_size() const { return step_size() * horizon; }
  bool valid() const { return states > 0 && actions > 0 && horizon > 0; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return "(S=" + std::to_string(d.states) + ", A=" + std::to_string(d.actions) +
         ", H=" + std::to_string(d.horizon) + ")";
}

/// Dense per-step table indexed (h, s, a).
class StepTable {
 public:
  StepTable() = default;
  explicit StepTable(Dims dims, double fill = 0.0) : dims_(dims), v_(dims.table_size(), fill) {
    if (!dims.valid()) throw std::invalid_argument("StepTable: dimensions must be positive " + to_string(dims));
  }
  StepTable(Dims dims, std::vector<double> values) : dims_(dims), v_(std::move(values)) {
    if (!dims.valid()) throw std::invalid_argument("StepTable: dimensions must be positive " + to_string(dims));
    detail::require(v_.size() == dims.table_size(), "StepTable: value count does not match dimensions");
  }

  const Dims& dims() const { return dims_; }
  std::size_t index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * dims_.states + s) * dims_.actions + a;
  }
  double operator()(int h, int s, int a) const { return v_[index(h, s, a)]; }
  double& operator()(int h, int s, int a) { return v_[index(h, s, a)]; }

  std::span<const double> row(int h, int s) const {
    return {v_.data() + index(h, s, 0), static_cast<std::size_t>(dims_.actions)};
  }
  std::span<double> row(int h, int s) {
    return {v_.data() + index(h, s, 0), static_cast<std::size_t>(dims_.actions)};
  }
  std::span<const double> step(int h) const {
    return {v_.data() + index(h, 0, 0), dims_.step_size()};
  }
  std::span<const double> values() const { return v_; }
  std::span<double> values() { return v_; }

  double step_sum(int h) const {
    double total = 0.0;
    for (double x : step(h)) total += x;
    return total;
  }

  friend bool operator==(const StepTable&, const StepTable&) = default;

 private:
  Dims dims_;
  std::vector<double> v_;
};

inline void require_same_shape(const StepTable& a, const StepTable& b, const char* what) {
  if (!(a.dims() == b.dims())) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a.dims()) + " vs " +
                                to_string(b.dims()));
  }
}

/// Finite-horizon MDP with time-indexed transitions and rewards in [0, 1].
class TabularMdp {
 public:
  struct Successor {
    int state;
    double prob;
  };

  /// `transitions` is laid out [h][s][a][s'].
  TabularMdp(Dims dims, std::vector<double> initial, std::vector<double> transitions,
             StepTable rewards)
      : dims_(dims),
        initial_(std::move(initial)),
        transitions_(std::move(transitions)),
        rewards_(std::move(rewards)) {
    validate();
    build_successors();
  }

  /// Replicates one step's transitions ([s][a][s']) and rewards ([s][a]) across the horizon.
  static TabularMdp stationary(Dims dims, std::vector<double> initial,
                               std::span<const double> step_transitions,
                               std::span<const double> step_rewards) {
    const std::size_t tsize = dims.step_size() * dims.states;
    if (!dims.valid()) throw std::invalid_argument("TabularMdp: dimensions must be positive " + to_string(dims));
    detail::require(step_transitions.size() == tsize, "TabularMdp: step transition size mismatch");
    detail::require(step_rewards.size() == dims.step_size(), "TabularMdp: step reward size mismatch");
    std::vector<double> trans;
    trans.reserve(tsize * dims.horizon);
    std::vector<double> rew;
    rew.reserve(dims.table_size());
    for (int h = 0; h < dims.horizon; ++h) {
      trans.insert(trans.end(), step_transitions.begin(), step_transitions.end());
      rew.insert(rew.end(), step_rewards.begin(), step_rewards.end());
    }
    return TabularMdp(dims, std::move(initial), std::move(trans), StepTable(dims, std::move(rew)));
  }

  const Dims& dims() const { return dims_; }
  int num_states() const { return dims_.states; }
  int num_actions() const { return dims_.actions; }
  int horizon() const { return dims_.horizon; }

  std::span<const double> initial_dist() const { return initial_; }
  const StepTable& rewards() const { return rewards_; }

  std::size_t row_index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * dims_.states + s) * dims_.actions + a;
  }
  std::span<const double> next_dist(int h, int s, int a) const {
    return {transitions_.data() + row_index(h, s, a) * dims_.states,
            static_cast<std::size_t>(dims_.states)};
  }
  double transition(int h, int s, int a, int next) const { return next_dist(h, s, a)[next]; }

  /// Non-zero entries of P_h(.|s,a), in increasing state order.
  std::span<const Successor> successors(int h, int s, int a) const {
    const std::size_t r = row_index(h, s, a);
    return {succ_.data() + succ_offsets_[r], succ_offsets_[r + 1] - succ_offsets_[r]};
  }

  std::span<const double> raw_transitions() const { return transitions_; }

  TabularMdp with_rewards(StepTable rewards) const {
    return TabularMdp(dims_, initial_, transitions_, std::move(rewards));
  }

 private:
  void validate() const {
    if (!dims_.valid()) throw std::invalid_argument("TabularMdp: dimensions must be positive " + to_string(dims_));
    detail::require(initial_.size() == static_cast<std::size_t>(dims_.states),
                    "TabularMdp: initial distribution has wrong length");
    detail::require(transitions_.size() == dims_.table_size() * dims_.states,
                    "TabularMdp: transition tensor has wrong size");
    detail::require(rewards_.dims() == dims_, "TabularMdp: reward table shape mismatch");
    check_distribution(initial_, "initial distribution");
    for (std::size_t r = 0; r < dims_.table_size(); ++r) {
      check_distribution({transitions_.data() + r * dims_.states, static_cast<std::size_t>(dims_.states)},
                         "transition row");
    }
    for (double x : rewards_.values()) {
      detail::require(std::isfinite(x) && x >= 0.0 && x <= 1.0, "TabularMdp: rewards must lie in [0, 1]");
    }
  }

  static void check_distribution(std::span<const double> p, const char* what) {
    double total = 0.0;
    for (double x : p) {
      if (!std::isfinite(x) || x < 0.0) {
        throw std::invalid_argument(std::string("TabularMdp: negative or non-finite entry in ") + what);
      }
      total += x;
    }
    if (!(std::abs(total - 1.0) <= kConstructionTol)) {
      throw std::invalid_argument(std::string("TabularMdp: ") + what + " does not sum to 1");
    }
  }

  void build_successors() {
    const std::size_t rows = dims_.table_size();
    succ_offsets_.assign(rows + 1, 0);
    succ_.clear();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* p = transitions_.data() + r * dims_.states;
      for (int s2 = 0; s2 < dims_.states; ++s2) {
        if (p[s2] > 0.0) succ_.push_back({s2, p[s2]});
      }
      succ_offsets_[r + 1] = succ_.size();
    }
  }

  Dims dims_;
  std::vector<double> initial_;
  std::vector<double> transitions_;
  StepTable rewards_;
  std::vector<std::size_t> succ_offsets_;
  std::vector<Successor> succ_;
};

/// Time-indexed stochastic policy pi_h(a|s).
class Policy {
 public:
  explicit Policy(StepTable probs) : probs_(std::move(probs)) {
    const Dims& d = probs_.dims();
    for (int h = 0; h < d.horizon; ++h) {
      for (int s = 0; s < d.states; ++s) {
        double total = 0.0;
        for (double x : probs_.row(h, s)) {
          detail::require(std::isfinite(x) && x >= 0.0, "Policy: negative or non-finite probability");
          total += x;
        }
        detail::require(std::abs(total - 1.0) <= kConstructionTol, "Policy: row does not sum to 1");
      }
    }
  }

  static Policy uniform(Dims dims) { return Policy(StepTable(dims, 1.0 / dims.actions)); }

  /// `actions` holds one action per (h, s), laid out [h][s].
  static Policy deterministic(Dims dims, std::span<const int> actions) {
    detail::require(actions.size() == static_cast<std::size_t>(dims.horizon) * dims.states,
                    "Policy::deterministic: need one action per (step, state)");
    StepTable t(dims, 0.0);
    for (int h = 0; h < dims.horizon; ++h) {
      for (int s = 0; s < dims.states; ++s) {
        const int a = actions[static_cast<std::size_t>(h) * dims.states + s];
        detail::require(a >= 0 && a < dims.actions, "Policy::deterministic: action out of range");
        t(h, s, a) = 1.0;
      }
    }
    return Policy(std::move(t));
  }

  const Dims& dims() const { return probs_.dims(); }
  const StepTable& table() const { return probs_; }
  double prob(int h, int s, int a) const { return probs_(h, s, a); }
  std::span<const double> row(int h, int s) const { return probs_.row(h, s); }

  bool is_deterministic() const {
    for (double x : probs_.values()) {
      if (x != 0.0 && x != 1.0) return false;
    }
    return true;
  }

  /// Most probable action at (h, s), lowest index on ties.
  int greedy_action(int h, int s) const {
    auto r = row(h, s);
    return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }

  std::uint64_t fingerprint() const {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (double x : probs_.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      hash ^= bits;
      hash *= 0x100000001b3ULL;
    }
    return hash;
  }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  StepTable probs_;
};

/// Per-episode randomization over component policies.
class MixturePolicy {
 public:
  MixturePolicy(std::vector<Policy> components, std::vector<double> weights)
      : components_(std::move(components)), weights_(std::move(weights)) {
    detail::require(!components_.empty(), "MixturePolicy: needs at least one component");
    detail::require(components_.size() == weights_.size(), "MixturePolicy: one weight per component");
    double total = 0.0;
    for (double w : weights_) {
      detail::require(std::isfinite(w) && w >= 0.0, "MixturePolicy: weights must be non-negative");
      total += w;
    }
    detail::require(std::abs(total - 1.0) <= kConstructionTol, "MixturePolicy: weights do not sum to 1");
    for (const auto& c : components_) {
      detail::require(c.dims() == components_.front().dims(), "MixturePolicy: component shape mismatch");
    }
  }
  explicit MixturePolicy(Policy single) : MixturePolicy(std::vector<Policy>{std::move(single)}, {1.0}) {}

  const Dims& dims() const { return components_.front().dims(); }
  std::size_t size() const { return components_.size(); }
  const std::vector<Policy>& components() const { return components_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<Policy> components_;
  std::vector<double> weights_;
};

/// Accumulates weighted policies, merging exact duplicates, then normalizes.
class MixtureBuilder {
 public:
  void add(const Policy& p, double weight) {
    const std::uint64_t key = p.fingerprint();
    auto [it, end] = by_fingerprint_.equal_range(key);
    for (; it != end; ++it) {
      if (components_[it->second] == p) {
        weights_[it->second] += weight;
        return;
      }
    }
    by_fingerprint_.emplace(key, components_.size());
    components_.push_back(p);
    weights_.push_back(weight);
  }

  /// Multiplies every accumulated weight by `factor`.
  void scale(double factor) {
    for (double& w : weights_) w *= factor;
  }

  bool empty() const { return components_.empty(); }
  std::size_t size() const { return components_.size(); }

  MixturePolicy build() const {
    detail::require(!components_.empty(), "MixtureBuilder: no components");
    double total = 0.0;
    for (double w : weights_) total += w;
    detail::require(total > 0.0, "MixtureBuilder: total weight must be positive");
    std::vector<double> w(weights_);
    for (double& x : w) x /= total;
    return MixturePolicy(components_, std::move(w));
  }

 private:
  std::vector<Policy> components_;
  std::vector<double> weights_;
  std::unordered_multimap<std::uint64_t, std::size_t> by_fingerprint_;
};

/// P_h(s, a) for a policy; every step sums to one.
class OccupancyMeasure {
 public:
  explicit OccupancyMeasure(StepTable table) : table_(std::move(table)) {
    for (int h = 0; h < table_.dims().horizon; ++h) {
      for (double x : table_.step(h)) {
        detail::require(std::isfinite(x) && x >= -kArithmeticTol, "OccupancyMeasure: negative entry");
      }
      detail::require(std::abs(table_.step_sum(h) - 1.0) <= kArithmeticTol,
                      "OccupancyMeasure: step " + std::to_string(h) + " does not sum to 1");
    }
  }
  const StepTable& table() const { return table_; }
  const Dims& dims() const { return table_.dims(); }
  double operator()(int h, int s, int a) const { return table_(h, s, a); }

 private:
  StepTable table_;
};

/// Reward weights in the unit l-infinity ball.
class RewardWeights {
 public:
  explicit RewardWeights(StepTable table) : table_(std::move(table)) {
    for (double x : table_.values()) {
      detail::require(std::isfinite(x) && std::abs(x) <= 1.0, "RewardWeights: entry outside [-1, 1]");
    }
  }
  static RewardWeights zeros(Dims dims) { return RewardWeights(StepTable(dims, 0.0)); }
  const StepTable& table() const { return table_; }
  const Dims& dims() const { return table_.dims(); }
  double operator()(int h, int s, int a) const { return table_(h, s, a); }

 private:
  StepTable table_;
};

struct QFunction {
  StepTable table;
};

namespace detail {
inline void require_policy_fits(const TabularMdp& mdp, const Dims& d, const char* what) {
  if (!(mdp.dims() == d)) {
    throw std::invalid_argument(std::string(what) + ": policy shape " + to_string(d) + " does not match MDP " +
                                to_string(mdp.dims()));
  }
}

inline void require_reward_fits(const TabularMdp& mdp, const StepTable& r, const char* what) {
  if (!(mdp.dims() == r.dims())) {
    throw std::invalid_argument(std::string(what) + ": reward shape " + to_string(r.dims()) + " does not match MDP " +
                                to_string(mdp.dims()));
  }
}

/// Forward recursion without the normalization check; shared by the mixture path.
inline void accumulate_occupancy(const TabularMdp& mdp, const Policy& policy, double weight,
                                 StepTable& out) {
  const Dims& d = mdp.dims();
  std::vector<double> state(mdp.initial_dist().begin(), mdp.initial_dist().end());
  std::vector<double> next(d.states);
  for (int h = 0; h < d.horizon; ++h) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < d.states; ++s) {
      const double ps = state[s];
      if (ps == 0.0) continue;
      auto pi = policy.row(h, s);
      for (int a = 0; a < d.actions; ++a) {
        const double psa = ps * pi[a];
        if (psa == 0.0) continue;
        out(h, s, a) += weight * psa;
        if (h + 1 < d.horizon) {
          for (const auto& [s2, p] : mdp.successors(h, s, a)) next[s2] += psa * p;
        }
      }
    }
    state.swap(next);
  }
}
}  // namespace detail

inline OccupancyMeasure occupancy(const TabularMdp& mdp, const Policy& policy) {
  detail::require_policy_fits(mdp, policy.dims(), "occupancy");
  StepTable out(mdp.dims(), 0.0);
  detail::accumulate_occupancy(mdp, policy, 1.0, out);
  return OccupancyMeasure(std::move(out));
}

inline OccupancyMeasure mixture_occupancy(const TabularMdp& mdp, const MixturePolicy& mix) {
  detail::require_policy_fits(mdp, mix.dims(), "mixture_occupancy");
  StepTable out(mdp.dims(), 0.0);
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (mix.weights()[i] == 0.0) continue;
    detail::accumulate_occupancy(mdp, mix.components()[i], mix.weights()[i], out);
  }
  return OccupancyMeasure(std::move(out));
}

/// Sum over h, s, a of occ * reward.
inline double value_dual(const StepTable& occ, const StepTable& reward) {
  require_same_shape(occ, reward, "value_dual");
  double v = 0.0;
  auto o = occ.values();
  auto r = reward.values();
  for (std::size_t i = 0; i < o.size(); ++i) v += o[i] * r[i];
  return v;
}
inline double value_dual(const OccupancyMeasure& occ, const StepTable& reward) {
  return value_dual(occ.table(), reward);
}

namespace detail {
/// Backward policy evaluation. Returns V as an (H+1) x S table, last row zero.
inline std::vector<double> evaluate_values(const TabularMdp& mdp, const Policy& policy,
                                           const StepTable& reward, StepTable* q_out) {
  const Dims& d = mdp.dims();
  std::vector<double> v(static_cast<std::size_t>(d.horizon + 1) * d.states, 0.0);
  for (int h = d.horizon - 1; h >= 0; --h) {
    const double* vnext = v.data() + static_cast<std::size_t>(h + 1) * d.states;
    double* vh = v.data() + static_cast<std::size_t>(h) * d.states;
    for (int s = 0; s < d.states; ++s) {
      auto pi = policy.row(h, s);
      double total = 0.0;
      for (int a = 0; a < d.actions; ++a) {
        double q = reward(h, s, a);
        for (const auto& [s2, p] : mdp.successors(h, s, a)) q += p * vnext[s2];
        if (q_out) (*q_out)(h, s, a) = q;
        total += pi[a] * q;
      }
      vh[s] = total;
    }
  }
  return v;
}
}  // namespace detail

/// Expected return E_{s ~ rho} V_1(s) by backward induction.
inline double bellman_value(const TabularMdp& mdp, const Policy& policy, const StepTable& reward) {
  detail::require_policy_fits(mdp, policy.dims(), "bellman_value");
  detail::require_reward_fits(mdp, reward, "bellman_value");
  const auto v = detail::evaluate_values(mdp, policy, reward, nullptr);
  double total = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) total += mdp.initial_dist()[s] * v[s];
  return total;
}
inline double bellman_value(const TabularMdp& mdp, const Policy& policy) {
  return bellman_value(mdp, policy, mdp.rewards());
}

inline double bellman_value(const TabularMdp& mdp, const MixturePolicy& mix, const StepTable& reward) {
  double total = 0.0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (mix.weights()[i] != 0.0) total += mix.weights()[i] * bellman_value(mdp, mix.components()[i], reward);
  }
  return total;
}

inline QFunction q_values(const TabularMdp& mdp, const Policy& policy, const StepTable& reward) {
  detail::require_policy_fits(mdp, policy.dims(), "q_values");
  detail::require_reward_fits(mdp, reward, "q_values");
  QFunction q{StepTable(mdp.dims(), 0.0)};
  detail::evaluate_values(mdp, policy, reward, &q.table);
  return q;
}

struct OptimalPolicy {
  Policy policy;
  double value;
};

/// Greedy backward induction. Ties go to the lowest action index.
inline OptimalPolicy value_iteration(const TabularMdp& mdp, const StepTable& reward) {
  detail::require_reward_fits(mdp, reward, "value_iteration");
  const Dims& d = mdp.dims();
  for (double x : reward.values()) {
    if (!std::isfinite(x)) throw NumericError("value_iteration: non-finite reward");
  }
  std::vector<double> vnext(d.states, 0.0), vh(d.states);
  std::vector<int> actions(static_cast<std::size_t>(d.horizon) * d.states, 0);
  for (int h = d.horizon - 1; h >= 0; --h) {
    for (int s = 0; s < d.states; ++s) {
      double best = 0.0;
      int best_a = 0;
      for (int a = 0; a < d.actions; ++a) {
        double q = reward(h, s, a);
        for (const auto& [s2, p] : mdp.successors(h, s, a)) q += p * vnext[s2];
        if (a == 0 || q > best) {
          best = q;
          best_a = a;
        }
      }
      vh[s] = best;
      actions[static_cast<std::size_t>(h) * d.states + s] = best_a;
    }
    vnext.swap(vh);
  }
  double value = 0.0;
  for (int s = 0; s < d.states; ++s) value += mdp.initial_dist()[s] * vnext[s];
  return {Policy::deterministic(d, actions), value};
}
inline OptimalPolicy value_iteration(const TabularMdp& mdp, const RewardWeights& w) {
  return value_iteration(mdp, w.table());
}

/// Sum over steps of the l1 distance between per-step tables.
inline double l1_occupancy_distance(const StepTable& a, const StepTable& b) {
  require_same_shape(a, b, "l1_occupancy_distance");
  double total = 0.0;
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(x[i] - y[i]);
  return total;
}
inline double l1_occupancy_distance(const OccupancyMeasure& a, const OccupancyMeasure& b) {
  return l1_occupancy_distance(a.table(), b.table());
}

}  // namespace tabail
