// tabail: command-line front end for environments, single runs, sweeps,
// slope reports and estimator-error studies.
//
// stdout carries one JSON document per invocation; diagnostics go to stderr.
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tabail/harness.hpp"

namespace {

using tabail::json;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct EnvFlags {
  std::string env = "standard-imitation";
  int states = 0;
  int actions = 5;
  int horizon = 10;
  std::int64_t m = 0;
};

void add_env_flags(CLI::App* cmd, EnvFlags& f, bool need_m) {
  cmd->add_option("--env", f.env, "Environment: standard-imitation | reset-cliff")
      ->check(CLI::IsMember({"standard-imitation", "standard_imitation", "reset-cliff", "reset_cliff"}))
      ->capture_default_str();
  cmd->add_option("--S", f.states, "Number of states")->required()->check(CLI::PositiveNumber);
  cmd->add_option("--A", f.actions, "Number of actions")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  cmd->add_option("--H", f.horizon, "Horizon")->check(CLI::PositiveNumber)->capture_default_str();
  auto* m = cmd->add_option("--m", f.m, "Number of expert trajectories (Reset Cliff also uses it for rho)")
                ->check(CLI::PositiveNumber);
  if (need_m) m->required();
}

std::string env_name(const std::string& flag) {
  return flag == "reset-cliff" || flag == "reset_cliff" ? "reset_cliff" : "standard_imitation";
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("TAB_AIL_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::logic_error&) {
    }
    throw tabail::ConfigError("TAB_AIL_SEED", "expected an unsigned integer, got '" + std::string(env) + "'");
  }
  return 0;
}

void add_seed_flag(CLI::App* cmd, std::optional<std::uint64_t>& seed) {
  cmd->add_option("--seed", seed, "Master seed (falls back to $TAB_AIL_SEED, then 0)");
}

json env_json(const tabail::EnvBundle& env, bool full) {
  const auto& d = env.mdp.dims();
  json j = {{"env", env.name},
            {"states", d.states},
            {"actions", d.actions},
            {"horizon", d.horizon},
            {"initial", std::vector<double>(env.mdp.initial_dist().begin(), env.mdp.initial_dist().end())},
            {"expert_value", tabail::bellman_value(env.mdp, env.expert)}};
  json expert = json::array();
  for (int h = 0; h < d.horizon; ++h) {
    std::vector<int> row;
    for (int s = 0; s < d.states; ++s) row.push_back(env.expert.greedy_action(h, s));
    expert.push_back(row);
  }
  j["expert_actions"] = expert;
  if (full) {
    j["rewards"] = tabail::table_to_json(env.mdp.rewards());
    json trans = json::array();
    for (int h = 0; h < d.horizon; ++h) {
      for (int s = 0; s < d.states; ++s) {
        for (int a = 0; a < d.actions; ++a) {
          for (const auto& [s2, p] : env.mdp.successors(h, s, a)) trans.push_back({h, s, a, s2, p});
        }
      }
    }
    j["transitions"] = {{"format", "[h, s, a, next_state, probability], nonzero entries"}, {"entries", trans}};
  }
  return j;
}

json slopes_json(const tabail::Summary& s) { return tabail::summary_to_json(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular imitation-learning toolkit: environments, single runs, sweeps and slope reports."};
  app.require_subcommand(1);

  // env
  EnvFlags env_flags;
  bool env_full = false;
  auto* env_cmd = app.add_subcommand("env", "Describe a benchmark environment as JSON");
  add_env_flags(env_cmd, env_flags, false);
  env_cmd->add_flag("--full", env_full, "Include rewards and all nonzero transitions");

  // run
  EnvFlags run_env;
  std::string run_algo;
  int run_iterations = 0;
  std::int64_t run_budget = 0;
  std::optional<std::uint64_t> run_seed;
  std::optional<double> run_gail_eta, run_oal_step;
  double run_delta = tabail::kDefaultDelta;
  bool run_trace = false;
  auto* run_cmd = app.add_subcommand("run", "Run one algorithm once and print its record as JSON");
  add_env_flags(run_cmd, run_env, true);
  run_cmd->add_option("--algo", run_algo, "bc | vail | tail | fem | gtal | gail | oal | mbtail")
      ->required()
      ->check(CLI::IsMember(tabail::known_algorithms()));
  run_cmd->add_option("--iterations,--T", run_iterations, "Solver iterations T (default 4H)")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--budget", run_budget, "Environment episodes for oal (K) and mbtail (n)")
      ->check(CLI::Range(std::int64_t{2}, std::int64_t{1} << 40));
  run_cmd->add_option("--gail-eta", run_gail_eta, "GAIL mirror-descent step")->check(CLI::PositiveNumber);
  run_cmd->add_option("--oal-step", run_oal_step, "OAL policy mirror-descent step")->check(CLI::PositiveNumber);
  run_cmd->add_option("--delta", run_delta, "Failure probability inside confidence terms")
      ->check(CLI::Range(1e-12, 1.0 - 1e-12))
      ->capture_default_str();
  run_cmd->add_flag("--trace", run_trace, "Include the solver trace in the output");
  add_seed_flag(run_cmd, run_seed);

  // sweep
  std::string sweep_spec, sweep_out;
  std::optional<std::uint64_t> sweep_seed;
  std::optional<int> sweep_seeds;
  int sweep_parallel = tabail::default_parallelism();
  bool sweep_traces = false, sweep_policies = false, sweep_estimates = false, sweep_wall = false, list_presets = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment spec and write records.csv and summary.json");
  sweep_cmd->add_option("--spec", sweep_spec, "Spec file (JSON) or preset name");
  sweep_cmd->add_option("--out", sweep_out, "Output directory (overrides the spec's output_dir)");
  sweep_cmd->add_option("--seeds", sweep_seeds, "Override the number of seeds")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--parallel", sweep_parallel, "Worker threads (default: available cores)")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_flag("--traces", sweep_traces, "Write traces/*.jsonl for solver runs");
  sweep_cmd->add_flag("--dump-policies", sweep_policies, "Write every output policy to policies/*.json");
  sweep_cmd->add_flag("--dump-estimates", sweep_estimates, "Write every expert estimate to estimates/*.json");
  sweep_cmd->add_flag("--record-wall-ms", sweep_wall, "Store wall-clock times in records.csv (not reproducible)");
  sweep_cmd->add_flag("--list-presets", list_presets, "Print the preset names and exit");
  add_seed_flag(sweep_cmd, sweep_seed);

  // slopes
  std::string slopes_csv, slopes_axis;
  auto* slopes_cmd = app.add_subcommand("slopes", "Summarize a records.csv with per-series log-log slopes");
  slopes_cmd->add_option("--csv", slopes_csv, "records.csv produced by sweep")->required();
  slopes_cmd->add_option("--axis", slopes_axis, "horizon | expert_m | interactions (default: inferred)")
      ->check(CLI::IsMember({"horizon", "expert_m", "interactions"}));

  // estimator-error
  EnvFlags est_env;
  std::string est_spec, est_out;
  std::vector<std::int64_t> est_grid;
  std::vector<std::string> est_names{"mle", "split_known"};
  int est_seeds = 20;
  int est_parallel = tabail::default_parallelism();
  std::optional<std::uint64_t> est_seed;
  auto* est_cmd = app.add_subcommand("estimator-error", "l1 error of expert-occupancy estimators across an m grid");
  est_cmd->add_option("--spec", est_spec, "Spec file or preset name (replaces the environment flags)");
  est_cmd->add_option("--env", est_env.env, "Environment: standard-imitation | reset-cliff")
      ->check(CLI::IsMember({"standard-imitation", "standard_imitation", "reset-cliff", "reset_cliff"}));
  est_cmd->add_option("--S", est_env.states, "Number of states")->check(CLI::PositiveNumber);
  est_cmd->add_option("--A", est_env.actions, "Number of actions")->check(CLI::Range(2, 1 << 20));
  est_cmd->add_option("--H", est_env.horizon, "Horizon")->check(CLI::PositiveNumber);
  est_cmd->add_option("--m-grid", est_grid, "Increasing list of m values")->delimiter(',')->check(CLI::PositiveNumber);
  est_cmd->add_option("--estimators", est_names, "mle | split_known | split (default: mle, split_known)")
      ->delimiter(',')
      ->check(CLI::IsMember({"mle", "split_known", "split"}));
  est_cmd->add_option("--seeds", est_seeds, "Seeds per grid point")->check(CLI::PositiveNumber);
  est_cmd->add_option("--out", est_out, "Directory for estimator_errors.csv (optional)");
  est_cmd->add_option("--parallel", est_parallel, "Worker threads")->check(CLI::PositiveNumber);
  add_seed_flag(est_cmd, est_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*env_cmd) {
      const auto bundle = tabail::build_env(env_name(env_flags.env), env_flags.states, env_flags.actions,
                                            env_flags.horizon, env_flags.m > 0 ? env_flags.m : 1000);
      std::cout << env_json(bundle, env_full).dump() << "\n";
      return 0;
    }

    if (*run_cmd) {
      const std::uint64_t seed = resolve_seed(run_seed);
      if ((run_algo == "oal" || run_algo == "mbtail") && run_budget < 2) {
        throw tabail::ConfigError("--budget", run_algo + " needs --budget of at least 2");
      }
      const auto bundle =
          tabail::build_env(env_name(run_env.env), run_env.states, run_env.actions, run_env.horizon, run_env.m);
      tabail::RngStream root(seed);
      tabail::RngStream data_rng = root.derive("expert-data");
      const tabail::Dataset d =
          tabail::sample_trajectories(bundle.mdp, bundle.expert, static_cast<std::size_t>(run_env.m), data_rng);
      tabail::RunParams p;
      p.algo = run_algo;
      p.iterations = run_iterations > 0 ? run_iterations : 4 * run_env.horizon;
      p.interactions = run_budget;
      p.gail_eta = run_gail_eta;
      p.oal_policy_step = run_oal_step;
      p.delta = run_delta;
      p.record_trace = run_trace;
      tabail::RngStream rng = root.derive("algo:" + run_algo);
      const auto t0 = std::chrono::steady_clock::now();
      const tabail::ImitationResult res = tabail::run_algorithm(bundle, d, p, rng);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      tabail::check_sandwich(res, run_algo);
      tabail::RunRecord r{"run", bundle.name, run_algo, 0, run_env.horizon, run_env.m,
                          res.interactions, res.value_gap, res.occupancy_gap, ms};
      json out = tabail::record_to_json(r);
      out["seed"] = seed;
      out["iterations"] = res.iterations;
      out["expert_value"] = res.expert_value;
      out["learner_value"] = res.learner_value;
      if (res.target_error) out["target_l1_error"] = *res.target_error;
      if (res.trace) {
        json tr = json::array();
        for (const auto& e : res.trace->entries) {
          tr.push_back({{"iteration", e.iteration}, {"loss", e.loss}, {"grad_norm", e.grad_norm}, {"step", e.step}});
        }
        out["trace"] = tr;
      }
      std::cout << out.dump() << "\n";
      return 0;
    }

    if (*sweep_cmd) {
      if (list_presets) {
        std::cout << json(tabail::preset_names()).dump() << "\n";
        return 0;
      }
      if (sweep_spec.empty()) throw tabail::ConfigError("--spec", "a spec file or preset name is required");
      tabail::ExperimentSpec spec = tabail::load_spec(sweep_spec);
      if (spec.algorithms.empty()) {
        throw tabail::ConfigError("algorithms", "'" + sweep_spec + "' defines no algorithms; use estimator-error");
      }
      if (sweep_seeds) spec.seeds = *sweep_seeds;
      tabail::SweepOptions opts;
      opts.master_seed = resolve_seed(sweep_seed);
      opts.parallel = sweep_parallel;
      opts.traces = sweep_traces;
      opts.dump_policies = sweep_policies;
      opts.dump_estimates = sweep_estimates;
      opts.record_wall_ms = sweep_wall;
      if (!sweep_out.empty()) opts.output_dir = sweep_out;
      std::cerr << "sweep " << spec.id << ": " << spec.algorithms.size() << " algorithms x " << spec.grid.size()
                << " grid points x " << spec.seeds << " seeds on " << opts.parallel << " workers\n";
      const auto t0 = std::chrono::steady_clock::now();
      const tabail::SweepResult res = tabail::run_sweep(spec, opts);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "wrote " << res.records.size() << " records to " << (res.output_dir / "records.csv").string()
                << " in " << secs << " s\n";
      json out = slopes_json(res.summary);
      out["experiment"] = spec.id;
      out["records"] = res.records.size();
      out["output_dir"] = res.output_dir.string();
      out["master_seed"] = opts.master_seed;
      std::cout << out.dump() << "\n";
      return 0;
    }

    if (*slopes_cmd) {
      const auto records = tabail::read_records_csv(slopes_csv);
      if (records.empty()) throw tabail::DataError("'" + slopes_csv + "' holds no records");
      tabail::SweepAxis axis = tabail::infer_axis(records);
      if (!slopes_axis.empty()) axis = tabail::detail::parse_axis(slopes_axis, "--axis");
      std::cout << slopes_json(tabail::summarize(records, axis)).dump() << "\n";
      return 0;
    }

    if (*est_cmd) {
      tabail::ExperimentSpec spec;
      if (!est_spec.empty()) {
        spec = tabail::load_spec(est_spec);
        if (spec.estimators.empty()) throw tabail::ConfigError("estimators", "'" + est_spec + "' defines no estimators");
        if (est_cmd->count("--seeds")) spec.seeds = est_seeds;
      } else {
        if (est_env.states <= 0) throw tabail::ConfigError("--S", "required unless --spec is given");
        if (est_grid.empty()) throw tabail::ConfigError("--m-grid", "required unless --spec is given");
        json doc = {{"id", "estimator-error"},
                    {"env",
                     {{"name", env_name(est_env.env)},
                      {"states", est_env.states},
                      {"actions", est_env.actions},
                      {"horizon", est_env.horizon}}},
                    {"sweep", {{"axis", "expert_m"}, {"values", est_grid}}},
                    {"estimators", est_names},
                    {"seeds", est_seeds}};
        spec = tabail::parse_spec(doc);
      }
      const std::uint64_t seed = resolve_seed(est_seed);
      const auto res = tabail::run_estimator_study(spec, seed, est_parallel);
      json out = tabail::estimator_summary_to_json(res);
      out["experiment"] = spec.id;
      out["master_seed"] = seed;
      if (!est_out.empty()) {
        const auto dir = tabail::detail::prepare_output_dir(est_out);
        tabail::write_estimator_csv(dir / "estimator_errors.csv", res.records);
        out["csv"] = (dir / "estimator_errors.csv").string();
      }
      std::cout << out.dump() << "\n";
      return 0;
    }
  } catch (const tabail::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
