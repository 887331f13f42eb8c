#pragma once

#include <string>
#include <vector>

#include "tabail/mdp.hpp"

namespace tabail {

/// A benchmark MDP with its deterministic demonstrator.
struct EnvBundle {
  TabularMdp mdp;
  Policy expert;
  std::string name;
};

/// Expert action at state `s` on Standard Imitation.
inline int standard_imitation_expert_action(int s, int num_actions) { return s % num_actions; }

/// Every state is absorbing, rho is uniform, and reward 1 is paid only for
/// the expert action.
inline EnvBundle make_standard_imitation(int num_states, int num_actions, int horizon) {
  detail::require(num_states >= 1, "make_standard_imitation: num_states must be >= 1");
  detail::require(num_actions >= 2, "make_standard_imitation: num_actions must be >= 2");
  detail::require(horizon >= 1, "make_standard_imitation: horizon must be >= 1");
  const Dims d{num_states, num_actions, horizon};
  std::vector<double> trans(d.step_size() * num_states, 0.0);
  std::vector<double> rew(d.step_size(), 0.0);
  std::vector<int> expert(static_cast<std::size_t>(horizon) * num_states);
  for (int s = 0; s < num_states; ++s) {
    const int e = standard_imitation_expert_action(s, num_actions);
    for (int a = 0; a < num_actions; ++a) {
      trans[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s] = 1.0;
    }
    rew[static_cast<std::size_t>(s) * num_actions + e] = 1.0;
    for (int h = 0; h < horizon; ++h) expert[static_cast<std::size_t>(h) * num_states + s] = e;
  }
  std::vector<double> rho(num_states, 1.0 / num_states);
  return {TabularMdp::stationary(d, std::move(rho), trans, rew), Policy::deterministic(d, expert),
          "standard_imitation"};
}

/// Initial distribution of Reset Cliff: (1/(m+1), ..., 1/(m+1), 1 - (S-2)/(m+1), 0).
inline std::vector<double> reset_cliff_initial(int num_states, int m_expert) {
  detail::require(num_states >= 3, "make_reset_cliff: num_states must be >= 3");
  detail::require(m_expert >= num_states - 3,
                  "make_reset_cliff: m_expert must be >= num_states - 3 = " +
                      std::to_string(num_states - 3) + " for rho to be a distribution");
  std::vector<double> rho(num_states, 0.0);
  const double rare = 1.0 / (static_cast<double>(m_expert) + 1.0);
  for (int s = 0; s < num_states - 2; ++s) rho[s] = rare;
  rho[num_states - 2] = 1.0 - static_cast<double>(num_states - 2) / (static_cast<double>(m_expert) + 1.0);
  return rho;
}

/// The last state is the absorbing bad state b. From any other state the
/// expert action (index 0) pays 1 and resets the state from rho; any other
/// action pays 0 and moves to b.
inline EnvBundle make_reset_cliff(int num_states, int num_actions, int horizon, int m_expert) {
  detail::require(num_actions >= 2, "make_reset_cliff: num_actions must be >= 2");
  detail::require(horizon >= 1, "make_reset_cliff: horizon must be >= 1");
  std::vector<double> rho = reset_cliff_initial(num_states, m_expert);
  const Dims d{num_states, num_actions, horizon};
  const int bad = num_states - 1;
  std::vector<double> trans(d.step_size() * num_states, 0.0);
  std::vector<double> rew(d.step_size(), 0.0);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      double* row = trans.data() + (static_cast<std::size_t>(s) * num_actions + a) * num_states;
      if (s != bad && a == 0) {
        for (int s2 = 0; s2 < num_states; ++s2) row[s2] = rho[s2];
        rew[static_cast<std::size_t>(s) * num_actions + a] = 1.0;
      } else {
        row[bad] = 1.0;
      }
    }
  }
  std::vector<int> expert(static_cast<std::size_t>(horizon) * num_states, 0);
  return {TabularMdp::stationary(d, std::move(rho), trans, rew), Policy::deterministic(d, expert),
          "reset_cliff"};
}

}  // namespace tabail
