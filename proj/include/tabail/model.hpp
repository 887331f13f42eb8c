#pragma once

// Environment interaction under an episode budget, the empirical transition
// model built from interaction data, and budget-driven reward-free exploration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "tabail/mdp.hpp"
#include "tabail/rng.hpp"
#include "tabail/trajectories.hpp"

namespace tabail {

inline constexpr double kDefaultDelta = 0.05;

/// Live environment access with a hard episode budget.
class EpisodeSimulator {
 public:
  EpisodeSimulator(const TabularMdp& env, std::int64_t budget) : env_(&env), budget_(budget) {
    detail::require(budget >= 0, "EpisodeSimulator: budget must be non-negative");
  }

  const Dims& dims() const { return env_->dims(); }
  std::int64_t budget() const { return budget_; }
  std::int64_t used() const { return used_; }
  std::int64_t remaining() const { return budget_ - used_; }

  /// One episode where the action at (h, s) comes from `choose(h, s, rng)`.
  template <class ChooseAction>
  Trajectory run_episode(ChooseAction&& choose, RngStream& rng) {
    if (used_ >= budget_) {
      throw BudgetError("episode budget of " + std::to_string(budget_) + " exhausted");
    }
    ++used_;
    const Dims& d = env_->dims();
    Trajectory tr;
    tr.steps.reserve(d.horizon);
    int s = static_cast<int>(rng.categorical(env_->initial_dist()));
    for (int h = 0; h < d.horizon; ++h) {
      const int a = choose(h, s, rng);
      tr.steps.push_back({s, a});
      if (h + 1 < d.horizon) s = detail::sample_next_state(*env_, h, s, a, rng);
    }
    return tr;
  }

  Trajectory run_policy(const Policy& policy, RngStream& rng) {
    detail::require_policy_fits(*env_, policy.dims(), "EpisodeSimulator::run_policy");
    return run_episode(
        [&policy](int h, int s, RngStream& r) { return static_cast<int>(r.categorical(policy.row(h, s))); },
        rng);
  }

  Dataset collect(const Policy& policy, std::int64_t episodes, RngStream& rng) {
    Dataset out{{}, DataSource::rollout};
    out.trajectories.reserve(static_cast<std::size_t>(std::max<std::int64_t>(episodes, 0)));
    for (std::int64_t i = 0; i < episodes; ++i) out.trajectories.push_back(run_policy(policy, rng));
    return out;
  }

 private:
  const TabularMdp* env_;
  std::int64_t budget_;
  std::int64_t used_ = 0;
};

/// Visit counts n_h(s, a), transition counts n_h(s, a, s') and the empirical
/// transition function. Rows of unvisited pairs fall back to uniform.
class EmpiricalModel {
 public:
  explicit EmpiricalModel(Dims dims)
      : dims_(dims), visits_(dims.table_size(), 0), rows_(dims.table_size()), initial_(dims.states, 0) {
    detail::require(dims.valid(), "EmpiricalModel: dimensions must be positive");
  }

  const Dims& dims() const { return dims_; }
  std::int64_t episodes() const { return episodes_; }

  void record(const Trajectory& tr) {
    detail::require(tr.length() == dims_.horizon, "EmpiricalModel: trajectory length differs from horizon");
    ++episodes_;
    ++initial_[tr.steps.front().state];
    for (int h = 0; h < dims_.horizon; ++h) {
      const auto [s, a] = tr.steps[h];
      const std::size_t r = row(h, s, a);
      ++visits_[r];
      if (h + 1 < dims_.horizon) {
        const int s2 = tr.steps[h + 1].state;
        auto& succ = rows_[r];
        auto it = std::find_if(succ.begin(), succ.end(), [s2](const auto& e) { return e.first == s2; });
        if (it == succ.end()) {
          succ.emplace_back(s2, 1);
        } else {
          ++it->second;
        }
      }
    }
  }
  void record(const Dataset& d) {
    for (const auto& tr : d.trajectories) record(tr);
  }

  std::int64_t visits(int h, int s, int a) const { return visits_[row(h, s, a)]; }

  std::int64_t transition_count(int h, int s, int a, int s2) const {
    for (const auto& [t, c] : rows_[row(h, s, a)]) {
      if (t == s2) return c;
    }
    return 0;
  }

  /// Number of transitions recorded out of (h, s, a). Equals visits() for
  /// h < H-1; the last step has no successor.
  std::int64_t outgoing(int h, int s, int a) const {
    std::int64_t n = 0;
    for (const auto& e : rows_[row(h, s, a)]) n += e.second;
    return n;
  }

  double transition_prob(int h, int s, int a, int s2) const {
    const std::int64_t n = outgoing(h, s, a);
    if (n == 0) return 1.0 / dims_.states;
    return static_cast<double>(transition_count(h, s, a, s2)) / static_cast<double>(n);
  }

  /// Empirical first-state frequencies; uniform before any episode.
  std::vector<double> initial_estimate() const {
    std::vector<double> rho(dims_.states, 1.0 / dims_.states);
    if (episodes_ == 0) return rho;
    for (int s = 0; s < dims_.states; ++s) rho[s] = static_cast<double>(initial_[s]) / episodes_;
    return rho;
  }

  /// Dense MDP with transitions P-hat, initial distribution rho-hat and zero rewards.
  TabularMdp to_mdp() const {
    std::vector<double> trans(dims_.table_size() * dims_.states, 0.0);
    for (int h = 0; h < dims_.horizon; ++h) {
      for (int s = 0; s < dims_.states; ++s) {
        for (int a = 0; a < dims_.actions; ++a) {
          const std::size_t r = row(h, s, a);
          double* out = trans.data() + r * dims_.states;
          const std::int64_t n = outgoing(h, s, a);
          if (n == 0) {
            std::fill(out, out + dims_.states, 1.0 / dims_.states);
          } else {
            for (const auto& [s2, c] : rows_[r]) out[s2] = static_cast<double>(c) / static_cast<double>(n);
          }
        }
      }
    }
    return TabularMdp(dims_, initial_estimate(), std::move(trans), StepTable(dims_, 0.0));
  }

  /// Occupancy of `policy` under (rho-hat, P-hat).
  StepTable occupancy(const Policy& policy) const {
    detail::require(policy.dims() == dims_, "EmpiricalModel::occupancy: shape mismatch");
    StepTable out(dims_, 0.0);
    std::vector<double> state = initial_estimate();
    std::vector<double> next(dims_.states);
    for (int h = 0; h < dims_.horizon; ++h) {
      std::fill(next.begin(), next.end(), 0.0);
      double uniform_pool = 0.0;
      for (int s = 0; s < dims_.states; ++s) {
        if (state[s] == 0.0) continue;
        auto pi = policy.row(h, s);
        for (int a = 0; a < dims_.actions; ++a) {
          const double psa = state[s] * pi[a];
          if (psa == 0.0) continue;
          out(h, s, a) += psa;
          if (h + 1 == dims_.horizon) continue;
          const std::size_t r = row(h, s, a);
          const std::int64_t n = outgoing(h, s, a);
          if (n == 0) {
            uniform_pool += psa;
          } else {
            for (const auto& [s2, c] : rows_[r]) next[s2] += psa * static_cast<double>(c) / static_cast<double>(n);
          }
        }
      }
      if (uniform_pool != 0.0) {
        for (double& x : next) x += uniform_pool / dims_.states;
      }
      state.swap(next);
    }
    return out;
  }

  /// Q-function of `policy` for `reward` under P-hat.
  QFunction q_values(const Policy& policy, const StepTable& reward) const {
    detail::require(policy.dims() == dims_ && reward.dims() == dims_, "EmpiricalModel::q_values: shape mismatch");
    QFunction q{StepTable(dims_, 0.0)};
    std::vector<double> vnext(dims_.states, 0.0), vh(dims_.states);
    for (int h = dims_.horizon - 1; h >= 0; --h) {
      double mean_next = 0.0;
      for (double x : vnext) mean_next += x;
      mean_next /= dims_.states;
      for (int s = 0; s < dims_.states; ++s) {
        auto pi = policy.row(h, s);
        double v = 0.0;
        for (int a = 0; a < dims_.actions; ++a) {
          const double value = reward(h, s, a) + expected_next(h, s, a, vnext, mean_next);
          q.table(h, s, a) = value;
          v += pi[a] * value;
        }
        vh[s] = v;
      }
      vnext.swap(vh);
    }
    return q;
  }

  /// Exploration uncertainty
  ///   W_h(s,a) = min(H, beta / max(n_h(s,a), 1) + sum_s' P-hat(s'|s,a) max_a' W_{h+1}(s', a')).
  StepTable uncertainty(double beta) const {
    StepTable w(dims_, 0.0);
    std::vector<double> vnext(dims_.states, 0.0), vh(dims_.states);
    const double cap = static_cast<double>(dims_.horizon);
    for (int h = dims_.horizon - 1; h >= 0; --h) {
      double mean_next = 0.0;
      for (double x : vnext) mean_next += x;
      mean_next /= dims_.states;
      for (int s = 0; s < dims_.states; ++s) {
        double best = 0.0;
        for (int a = 0; a < dims_.actions; ++a) {
          const double n = static_cast<double>(std::max<std::int64_t>(visits(h, s, a), 1));
          const double value = std::min(cap, beta / n + expected_next(h, s, a, vnext, mean_next));
          w(h, s, a) = value;
          best = std::max(best, value);
        }
        vh[s] = best;
      }
      vnext.swap(vh);
    }
    return w;
  }

 private:
  std::size_t row(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * dims_.states + s) * dims_.actions + a;
  }

  double expected_next(int h, int s, int a, const std::vector<double>& vnext, double mean_next) const {
    if (h + 1 == dims_.horizon) return 0.0;
    const std::size_t r = row(h, s, a);
    const std::int64_t n = outgoing(h, s, a);
    if (n == 0) return mean_next;
    double total = 0.0;
    for (const auto& [s2, c] : rows_[r]) total += static_cast<double>(c) * vnext[s2];
    return total / static_cast<double>(n);
  }

  Dims dims_;
  std::vector<std::int64_t> visits_;
  std::vector<std::vector<std::pair<int, std::int64_t>>> rows_;
  std::vector<std::int64_t> initial_;
  std::int64_t episodes_ = 0;
};

/// Log-confidence term log(|S| |A| H n / delta) shared by the exploration
/// uncertainty and the optimism bonus.
inline double confidence_log(const Dims& d, std::int64_t total_episodes, double delta) {
  detail::require(delta > 0.0 && delta < 1.0, "confidence_log: delta must lie in (0, 1)");
  const double n = static_cast<double>(std::max<std::int64_t>(total_episodes, 1));
  return std::log(static_cast<double>(d.states) * d.actions * d.horizon * n / delta);
}

/// Budget-driven reward-free exploration: each episode acts greedily (lowest
/// index on ties) on the uncertainty W computed from the data so far.
inline EmpiricalModel reward_free_explore(EpisodeSimulator& sim, std::int64_t episodes, RngStream& rng,
                                          double delta = kDefaultDelta) {
  detail::require(episodes >= 1, "reward_free_explore: need at least one episode");
  const Dims d = sim.dims();
  EmpiricalModel model(d);
  const double beta = confidence_log(d, episodes, delta);
  for (std::int64_t k = 0; k < episodes; ++k) {
    const StepTable w = model.uncertainty(beta);
    const Trajectory tr = sim.run_episode(
        [&w](int h, int s, RngStream&) {
          auto r = w.row(h, s);
          return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
        },
        rng);
    model.record(tr);
  }
  return model;
}

inline EmpiricalModel reward_free_explore(const TabularMdp& env, std::int64_t episodes, RngStream& rng,
                                          double delta = kDefaultDelta) {
  EpisodeSimulator sim(env, episodes);
  return reward_free_explore(sim, episodes, rng, delta);
}

}  // namespace tabail
