#pragma once

// Reward-player solvers for occupancy matching. The policy player always
// best-responds exactly with value_iteration, so the optimization error of
// the inner maximization is zero.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tabail/mdp.hpp"

namespace tabail {

enum class StepRule { adaptive, fixed };

struct SolverConfig {
  int iterations = 1;
  StepRule step_rule = StepRule::adaptive;
  double fixed_step = 1.0;
  bool record_trace = false;

  void validate() const {
    detail::require(iterations >= 1, "SolverConfig: iterations must be >= 1");
    detail::require(step_rule == StepRule::adaptive || fixed_step > 0.0,
                    "SolverConfig: fixed step must be positive");
  }
};

struct TraceEntry {
  int iteration = 0;               // 1-based
  std::uint64_t weights_hash = 0;  // FNV-1a of the reward weights used this round
  double loss = 0.0;               // f_t(w_t), or the FW objective after the update
  double grad_norm = 0.0;          // Euclidean norm of the gradient
  double best_response_value = 0.0;
  double step = 0.0;               // eta_t or the FW line-search gamma
};

struct SolverTrace {
  std::vector<TraceEntry> entries;
  std::size_t size() const { return entries.size(); }
};

struct SolveResult {
  MixturePolicy policy;
  SolverTrace trace;
  StepTable occupancy;  // occupancy of `policy` under the solver's dynamics
  int iterations_run = 0;
};

inline std::uint64_t hash_table(const StepTable& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : t.values()) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

/// Entrywise clamp onto the unit l-infinity ball.
inline RewardWeights project_linf(StepTable w) {
  for (double& x : w.values()) {
    if (!std::isfinite(x)) throw NumericError("project_linf: non-finite entry");
    x = std::clamp(x, -1.0, 1.0);
  }
  return RewardWeights(std::move(w));
}

/// D / sqrt(accumulated squared gradient norms), D = sqrt(2 H |S| |A|).
/// Zero when nothing has accumulated, which leaves the weights unchanged.
inline double adaptive_step(double grad_sq_accum, const Dims& dims) {
  detail::require(grad_sq_accum >= 0.0, "adaptive_step: accumulator must be non-negative");
  if (grad_sq_accum == 0.0) return 0.0;
  const double diameter = std::sqrt(2.0 * dims.horizon * dims.states * dims.actions);
  return diameter / std::sqrt(grad_sq_accum);
}

namespace detail {
inline void require_target_fits(const TabularMdp& dyn, const StepTable& target, const char* what) {
  if (!(dyn.dims() == target.dims())) {
    throw std::invalid_argument(std::string(what) + ": target shape " + to_string(target.dims()) +
                                " does not match dynamics " + to_string(dyn.dims()));
  }
  for (double x : target.values()) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite target entry");
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline StepTable uniform_mixture_occupancy(StepTable sum, int count) {
  for (double& x : sum.values()) x /= count;
  return sum;
}
}  // namespace detail

/// Online projected gradient descent on the reward weights against exact
/// best responses, for
///   min_pi max_{|w| <= 1} sum_h <w_h, P^pi_h - target_h>.
/// Returns the uniform mixture over the T best responses.
inline SolveResult ogd_saddle_solve(const TabularMdp& dynamics, const StepTable& target,
                                    const SolverConfig& cfg) {
  cfg.validate();
  detail::require_target_fits(dynamics, target, "ogd_saddle_solve");
  const Dims& d = dynamics.dims();
  StepTable w(d, 0.0);
  StepTable grad(d, 0.0);
  StepTable occ_sum(d, 0.0);
  MixtureBuilder mix;
  SolverTrace trace;
  double accum = 0.0;
  for (int t = 1; t <= cfg.iterations; ++t) {
    OptimalPolicy br = value_iteration(dynamics, w);
    const OccupancyMeasure occ = occupancy(dynamics, br.policy);
    auto o = occ.table().values();
    auto tg = target.values();
    auto g = grad.values();
    double loss = 0.0, gn2 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = o[i] - tg[i];
      loss += w.values()[i] * g[i];
      gn2 += g[i] * g[i];
      occ_sum.values()[i] += o[i];
    }
    accum += gn2;
    const double eta = cfg.step_rule == StepRule::adaptive ? adaptive_step(accum, d) : cfg.fixed_step;
    if (cfg.record_trace) {
      trace.entries.push_back({t, hash_table(w), loss, std::sqrt(gn2), br.value, eta});
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      w.values()[i] = std::clamp(w.values()[i] - eta * g[i], -1.0, 1.0);
    }
    mix.add(br.policy, 1.0);
  }
  return {mix.build(), std::move(trace), detail::uniform_mixture_occupancy(std::move(occ_sum), cfg.iterations),
          cfg.iterations};
}

/// Frank-Wolfe with exact line search on sum_h ||mu_h - target_h||_2^2 over
/// the occupancy polytope, starting from the uniform policy. Stops early once
/// the line search returns gamma = 0, since nothing changes after that.
inline SolveResult frank_wolfe_solve(const TabularMdp& dynamics, const StepTable& target,
                                     const SolverConfig& cfg) {
  cfg.validate();
  detail::require_target_fits(dynamics, target, "frank_wolfe_solve");
  const Dims& d = dynamics.dims();
  const Policy start = Policy::uniform(d);
  StepTable mu = occupancy(dynamics, start).table();
  MixtureBuilder mix;
  mix.add(start, 1.0);
  SolverTrace trace;
  StepTable neg_grad(d, 0.0);
  int run = 0;
  for (int k = 1; k <= cfg.iterations; ++k) {
    run = k;
    auto m = mu.values();
    auto tg = target.values();
    double gn2 = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      neg_grad.values()[i] = -2.0 * (m[i] - tg[i]);
      gn2 += neg_grad.values()[i] * neg_grad.values()[i];
    }
    OptimalPolicy br = value_iteration(dynamics, neg_grad);
    const OccupancyMeasure vertex = occupancy(dynamics, br.policy);
    auto v = vertex.table().values();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double diff = m[i] - v[i];
      num += (m[i] - tg[i]) * diff;
      den += diff * diff;
    }
    const double gamma = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
    if (gamma > 0.0) {
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = (1.0 - gamma) * m[i] + gamma * v[i];
      mix.scale(1.0 - gamma);
      mix.add(br.policy, gamma);
    }
    if (cfg.record_trace) {
      double obj = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) obj += (m[i] - tg[i]) * (m[i] - tg[i]);
      trace.entries.push_back({k, hash_table(neg_grad), obj, std::sqrt(gn2), br.value, gamma});
    }
    if (gamma == 0.0) break;
  }
  return {mix.build(), std::move(trace), std::move(mu), run};
}

/// Per-coordinate two-expert Hedge over the signs {+1, -1}. With cumulative
/// gradient G = sum_t (P^{pi_t} - target), the mean of the Hedge
/// distribution is w = -tanh(eta * G), eta = sqrt(ln 2 / T).
inline SolveResult mw_saddle_solve(const TabularMdp& dynamics, const StepTable& target,
                                   const SolverConfig& cfg) {
  cfg.validate();
  detail::require_target_fits(dynamics, target, "mw_saddle_solve");
  const Dims& d = dynamics.dims();
  const double eta = std::sqrt(std::log(2.0) / cfg.iterations);
  StepTable cumulative(d, 0.0);
  StepTable w(d, 0.0);
  StepTable occ_sum(d, 0.0);
  MixtureBuilder mix;
  SolverTrace trace;
  for (int t = 1; t <= cfg.iterations; ++t) {
    for (std::size_t i = 0; i < w.values().size(); ++i) {
      w.values()[i] = 0.0 - std::tanh(eta * cumulative.values()[i]);  // no -0.0 in the trace hash
    }
    OptimalPolicy br = value_iteration(dynamics, w);
    const OccupancyMeasure occ = occupancy(dynamics, br.policy);
    auto o = occ.table().values();
    auto tg = target.values();
    double loss = 0.0, gn2 = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) {
      const double g = o[i] - tg[i];
      loss += w.values()[i] * g;
      gn2 += g * g;
      cumulative.values()[i] += g;
      occ_sum.values()[i] += o[i];
    }
    if (cfg.record_trace) trace.entries.push_back({t, hash_table(w), loss, std::sqrt(gn2), br.value, eta});
    mix.add(br.policy, 1.0);
  }
  return {mix.build(), std::move(trace), detail::uniform_mixture_occupancy(std::move(occ_sum), cfg.iterations),
          cfg.iterations};
}

/// pi'_h(a|s) proportional to pi_h(a|s) exp(eta Q_h(s, a)). The exponent is
/// shifted by its maximum over the row's support before exponentiation.
inline Policy mirror_descent_policy(const Policy& policy, const QFunction& q, double eta) {
  detail::require(eta >= 0.0, "mirror_descent_policy: eta must be non-negative");
  detail::require(policy.dims() == q.table.dims(), "mirror_descent_policy: shape mismatch");
  const Dims& d = policy.dims();
  StepTable out(d, 0.0);
  for (int h = 0; h < d.horizon; ++h) {
    for (int s = 0; s < d.states; ++s) {
      auto pi = policy.row(h, s);
      auto qr = q.table.row(h, s);
      auto o = out.row(h, s);
      double shift = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < d.actions; ++a) {
        if (pi[a] > 0.0) shift = std::max(shift, eta * qr[a]);
      }
      double total = 0.0;
      for (int a = 0; a < d.actions; ++a) {
        o[a] = pi[a] > 0.0 ? pi[a] * std::exp(eta * qr[a] - shift) : 0.0;
        total += o[a];
      }
      for (int a = 0; a < d.actions; ++a) o[a] /= total;
    }
  }
  return Policy(std::move(out));
}

}  // namespace tabail
