#pragma once

// Experiment sweeps: spec parsing, seed fan-out over a worker pool, CSV and
// JSON artifacts, and log-log slope fits.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "tabail/environments.hpp"
#include "tabail/errors.hpp"
#include "tabail/estimators.hpp"
#include "tabail/imitation.hpp"
#include "tabail/presets.hpp"
#include "tabail/rng.hpp"

namespace tabail {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";
inline constexpr const char* kCsvHeader = "experiment,env,algo,seed,H,m,interactions,value_gap,l1_error,wall_ms";
inline constexpr double kSlopeFloor = 1e-12;
inline constexpr double kSandwichTol = 1e-9;

enum class SweepAxis { horizon, expert_m, interactions };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::horizon: return "horizon";
    case SweepAxis::expert_m: return "expert_m";
    case SweepAxis::interactions: return "interactions";
  }
  return "?";
}

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names = {"bc", "vail", "tail", "fem", "gtal", "gail", "oal", "mbtail"};
  return names;
}

inline bool algorithm_needs_iterations(const std::string& algo) { return algo != "bc" && algo != "oal"; }

/// Iteration count that is either fixed or a multiple of the horizon ("4H").
struct IterationRule {
  int fixed = 0;
  int per_horizon = 0;

  int resolve(int horizon) const { return per_horizon > 0 ? per_horizon * horizon : fixed; }
  json to_json() const {
    if (per_horizon == 0) return fixed;
    return per_horizon == 1 ? std::string("H") : std::to_string(per_horizon) + "H";
  }
};

struct EnvConfig {
  std::string name;  // standard_imitation | reset_cliff
  int states = 0;
  int actions = 0;
  int horizon = 0;      // ignored when sweeping the horizon
  std::int64_t m = 0;   // ignored when sweeping m
};

struct ExperimentSpec {
  std::string id = "experiment";
  EnvConfig env;
  SweepAxis axis = SweepAxis::expert_m;
  std::vector<std::int64_t> grid;
  std::vector<std::string> algorithms;
  std::vector<EstimateKind> estimators;
  std::map<std::string, IterationRule> iterations;
  std::optional<double> gail_eta;
  std::optional<double> oal_policy_step;
  double delta = kDefaultDelta;
  std::int64_t interactions = 0;  // budget when not sweeping interactions
  int seeds = 20;
  std::string output_dir = "out";
};

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline const json& field(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key)) throw ConfigError(join_path(path, key), "missing required field");
  return obj.at(key);
}

inline std::int64_t as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<std::int64_t>();
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

inline int positive_int(const json& v, const std::string& path) {
  const std::int64_t x = as_int(v, path);
  if (x < 1 || x > 1'000'000'000) throw ConfigError(path, "must be a positive integer");
  return static_cast<int>(x);
}

inline IterationRule parse_iteration_rule(const json& v, const std::string& path) {
  if (v.is_number_integer()) return {positive_int(v, path), 0};
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (!s.empty() && (s.back() == 'H' || s.back() == 'h')) {
      s.pop_back();
      if (s.empty()) return {0, 1};
      if (std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }) && s.size() < 9) {
        const int k = std::stoi(s);
        if (k >= 1) return {0, k};
      }
    }
  }
  throw ConfigError(path, "expected a positive integer or a horizon multiple such as \"4H\"");
}

inline SweepAxis parse_axis(const std::string& s, const std::string& path) {
  if (s == "horizon" || s == "H") return SweepAxis::horizon;
  if (s == "expert_m" || s == "m") return SweepAxis::expert_m;
  if (s == "interactions") return SweepAxis::interactions;
  throw ConfigError(path, "unknown sweep axis '" + s + "' (expected horizon, expert_m or interactions)");
}

inline EstimateKind parse_estimator(const std::string& s, const std::string& path) {
  if (s == "mle") return EstimateKind::mle;
  if (s == "split_known" || s == "split") return EstimateKind::split_known;
  throw ConfigError(path, "unknown estimator '" + s + "' (expected mle or split_known)");
}

inline std::string normalize_env_name(const std::string& s) {
  if (s == "standard_imitation" || s == "standard-imitation") return "standard_imitation";
  if (s == "reset_cliff" || s == "reset-cliff") return "reset_cliff";
  return {};
}

}  // namespace detail

/// Parses and validates a spec document. Errors carry the offending field path.
inline ExperimentSpec parse_spec(const json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ConfigError("", "spec must be an object");
  static const std::set<std::string> top_keys = {"id", "env", "sweep", "algorithms", "estimators", "iterations",
                                                 "options", "interactions", "seeds", "output_dir"};
  for (const auto& [k, v] : doc.items()) {
    if (!top_keys.count(k)) throw ConfigError(k, "unknown field");
  }
  ExperimentSpec spec;
  if (doc.contains("id")) spec.id = as_string(doc.at("id"), "id");
  if (spec.id.empty() || spec.id.find_first_of(",\"\n\r") != std::string::npos) {
    throw ConfigError("id", "must be non-empty and free of commas, quotes and newlines");
  }

  const json& env = field(doc, "", "env");
  if (!env.is_object()) throw ConfigError("env", "expected an object");
  for (const auto& [k, v] : env.items()) {
    if (k != "name" && k != "states" && k != "actions" && k != "horizon" && k != "m") {
      throw ConfigError("env." + k, "unknown field");
    }
  }
  spec.env.name = normalize_env_name(as_string(field(env, "env", "name"), "env.name"));
  if (spec.env.name.empty()) throw ConfigError("env.name", "expected standard_imitation or reset_cliff");
  spec.env.states = positive_int(field(env, "env", "states"), "env.states");
  spec.env.actions = positive_int(field(env, "env", "actions"), "env.actions");
  if (spec.env.actions < 2) throw ConfigError("env.actions", "need at least 2 actions");

  const json& sweep = field(doc, "", "sweep");
  if (!sweep.is_object()) throw ConfigError("sweep", "expected an object");
  spec.axis = parse_axis(as_string(field(sweep, "sweep", "axis"), "sweep.axis"), "sweep.axis");
  const json& values = field(sweep, "sweep", "values");
  if (!values.is_array() || values.empty()) throw ConfigError("sweep.values", "expected a non-empty list");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string p = "sweep.values[" + std::to_string(i) + "]";
    const std::int64_t x = as_int(values[i], p);
    if (x <= 0) throw ConfigError(p, "grid values must be positive");
    if (!spec.grid.empty() && x <= spec.grid.back()) throw ConfigError(p, "grid values must be strictly increasing");
    spec.grid.push_back(x);
  }

  if (spec.axis != SweepAxis::horizon) spec.env.horizon = positive_int(field(env, "env", "horizon"), "env.horizon");
  if (spec.axis != SweepAxis::expert_m) spec.env.m = positive_int(field(env, "env", "m"), "env.m");
  if (spec.axis == SweepAxis::horizon) {
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
      if (spec.grid[i] > 1'000'000) {
        throw ConfigError("sweep.values[" + std::to_string(i) + "]", "horizon too large");
      }
    }
  }

  if (doc.contains("algorithms")) {
    const json& algos = doc.at("algorithms");
    if (!algos.is_array()) throw ConfigError("algorithms", "expected a list");
    for (std::size_t i = 0; i < algos.size(); ++i) {
      const std::string p = "algorithms[" + std::to_string(i) + "]";
      const std::string a = as_string(algos[i], p);
      const auto& known = known_algorithms();
      if (std::find(known.begin(), known.end(), a) == known.end()) throw ConfigError(p, "unknown algorithm '" + a + "'");
      if (std::find(spec.algorithms.begin(), spec.algorithms.end(), a) != spec.algorithms.end()) {
        throw ConfigError(p, "duplicate algorithm '" + a + "'");
      }
      spec.algorithms.push_back(a);
    }
  }
  if (doc.contains("estimators")) {
    const json& ests = doc.at("estimators");
    if (!ests.is_array()) throw ConfigError("estimators", "expected a list");
    for (std::size_t i = 0; i < ests.size(); ++i) {
      const std::string p = "estimators[" + std::to_string(i) + "]";
      const EstimateKind k = parse_estimator(as_string(ests[i], p), p);
      if (std::find(spec.estimators.begin(), spec.estimators.end(), k) != spec.estimators.end()) {
        throw ConfigError(p, "duplicate estimator");
      }
      spec.estimators.push_back(k);
    }
  }
  if (spec.algorithms.empty() && spec.estimators.empty()) {
    throw ConfigError("algorithms", "need at least one algorithm or estimator");
  }

  if (doc.contains("iterations")) {
    const json& it = doc.at("iterations");
    if (!it.is_object()) throw ConfigError("iterations", "expected an object");
    for (const auto& [k, v] : it.items()) {
      const auto& known = known_algorithms();
      if (std::find(known.begin(), known.end(), k) == known.end()) {
        throw ConfigError("iterations." + k, "unknown algorithm");
      }
      spec.iterations[k] = parse_iteration_rule(v, "iterations." + k);
    }
  }
  for (const auto& a : spec.algorithms) {
    if (algorithm_needs_iterations(a) && !spec.iterations.count(a)) {
      throw ConfigError("iterations." + a, "missing iteration count");
    }
  }

  if (doc.contains("options")) {
    const json& opts = doc.at("options");
    if (!opts.is_object()) throw ConfigError("options", "expected an object");
    for (const auto& [k, v] : opts.items()) {
      const std::string p = "options." + k;
      if (k == "gail_eta" || k == "oal_policy_step") {
        if (v.is_null()) continue;
        const double x = as_number(v, p);
        if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(p, "must be positive");
        (k == "gail_eta" ? spec.gail_eta : spec.oal_policy_step) = x;
      } else if (k == "delta") {
        spec.delta = as_number(v, p);
        if (!(spec.delta > 0.0 && spec.delta < 1.0)) throw ConfigError(p, "must lie in (0, 1)");
      } else {
        throw ConfigError(p, "unknown option");
      }
    }
  }

  if (doc.contains("interactions")) {
    spec.interactions = as_int(doc.at("interactions"), "interactions");
    if (spec.interactions < 0) throw ConfigError("interactions", "must be non-negative");
  }
  const bool uses_budget = std::any_of(spec.algorithms.begin(), spec.algorithms.end(),
                                       [](const std::string& a) { return a == "oal" || a == "mbtail"; });
  if (uses_budget && spec.axis != SweepAxis::interactions && spec.interactions < 2) {
    throw ConfigError("interactions", "oal and mbtail need an interaction budget of at least 2");
  }
  if (spec.axis == SweepAxis::interactions && spec.grid.front() < 2) {
    throw ConfigError("sweep.values[0]", "interaction budgets must be at least 2");
  }
  const bool splits = std::any_of(spec.algorithms.begin(), spec.algorithms.end(),
                                  [](const std::string& a) { return a == "tail" || a == "mbtail"; }) ||
                      std::find(spec.estimators.begin(), spec.estimators.end(), EstimateKind::split_known) !=
                          spec.estimators.end();
  if (splits) {
    const std::int64_t min_m = spec.axis == SweepAxis::expert_m ? spec.grid.front() : spec.env.m;
    if (min_m < 2) throw ConfigError(spec.axis == SweepAxis::expert_m ? "sweep.values[0]" : "env.m",
                                     "split-based methods need at least 2 expert trajectories");
  }
  if (spec.env.name == "reset_cliff") {
    if (spec.env.states < 3) throw ConfigError("env.states", "reset_cliff needs at least 3 states");
    const std::int64_t min_m = spec.axis == SweepAxis::expert_m ? spec.grid.front() : spec.env.m;
    if (min_m < spec.env.states - 3) {
      throw ConfigError(spec.axis == SweepAxis::expert_m ? "sweep.values[0]" : "env.m",
                        "reset_cliff needs m >= |S| - 3");
    }
  }

  if (doc.contains("seeds")) {
    const std::int64_t s = as_int(doc.at("seeds"), "seeds");
    if (s < 1 || s > 1'000'000) throw ConfigError("seeds", "must be at least 1");
    spec.seeds = static_cast<int>(s);
  }
  if (doc.contains("output_dir")) spec.output_dir = as_string(doc.at("output_dir"), "output_dir");
  return spec;
}

inline json spec_to_json(const ExperimentSpec& spec) {
  json env = {{"name", spec.env.name}, {"states", spec.env.states}, {"actions", spec.env.actions}};
  if (spec.axis != SweepAxis::horizon) env["horizon"] = spec.env.horizon;
  if (spec.axis != SweepAxis::expert_m) env["m"] = spec.env.m;
  json doc = {{"id", spec.id},
              {"env", env},
              {"sweep", {{"axis", to_string(spec.axis)}, {"values", spec.grid}}},
              {"seeds", spec.seeds},
              {"output_dir", spec.output_dir}};
  if (!spec.algorithms.empty()) doc["algorithms"] = spec.algorithms;
  if (!spec.estimators.empty()) {
    json e = json::array();
    for (auto k : spec.estimators) e.push_back(to_string(k));
    doc["estimators"] = e;
  }
  if (!spec.iterations.empty()) {
    json it = json::object();
    for (const auto& [k, v] : spec.iterations) it[k] = v.to_json();
    doc["iterations"] = it;
  }
  json opts = {{"delta", spec.delta}};
  if (spec.gail_eta) opts["gail_eta"] = *spec.gail_eta;
  if (spec.oal_policy_step) opts["oal_policy_step"] = *spec.oal_policy_step;
  doc["options"] = opts;
  if (spec.interactions > 0) doc["interactions"] = spec.interactions;
  return doc;
}

/// Loads a spec from a JSON file, or from a preset when `path_or_name` names one
/// and no such file exists.
inline ExperimentSpec load_spec(const std::string& path_or_name) {
  namespace fs = std::filesystem;
  json doc;
  if (fs::exists(path_or_name)) {
    std::ifstream in(path_or_name);
    if (!in) throw ConfigError("", "cannot open spec file '" + path_or_name + "'");
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("", "spec file '" + path_or_name + "' is not valid JSON: " + e.what());
    }
  } else if (auto text = find_preset(path_or_name)) {
    doc = json::parse(*text);
  } else {
    throw ConfigError("", "no spec file or preset named '" + path_or_name + "'");
  }
  return parse_spec(doc);
}

// ---------------------------------------------------------------------------
// Records

struct RunRecord {
  std::string experiment;
  std::string env;
  std::string algo;
  int seed = 0;
  int horizon = 0;
  std::int64_t m = 0;
  std::int64_t interactions = 0;
  double value_gap = 0.0;
  std::optional<double> l1_error;  // sum_h ||P^E_h - P^pi_h||_1 of the output policy
  double wall_ms = 0.0;
};

inline json record_to_json(const RunRecord& r) {
  json j = {{"experiment", r.experiment}, {"env", r.env},       {"algo", r.algo},
            {"seed", r.seed},             {"H", r.horizon},     {"m", r.m},
            {"interactions", r.interactions}, {"value_gap", r.value_gap}, {"wall_ms", r.wall_ms}};
  j["l1_error"] = r.l1_error ? json(*r.l1_error) : json(nullptr);
  return j;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string csv_row(const RunRecord& r) {
  std::ostringstream os;
  os << r.experiment << ',' << r.env << ',' << r.algo << ',' << r.seed << ',' << r.horizon << ',' << r.m << ','
     << r.interactions << ',' << format_double(r.value_gap) << ','
     << (r.l1_error ? format_double(*r.l1_error) : std::string()) << ',' << format_double(r.wall_ms);
  return os.str();
}

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline void write_records_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
  std::string text = std::string(kCsvHeader) + "\n";
  for (const auto& r : records) text += csv_row(r) + "\n";
  write_file_atomic(path, text);
}

inline std::vector<RunRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw DataError("'" + path.string() + "' does not start with the header " + std::string(kCsvHeader));
  }
  std::vector<RunRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    if (cols.size() != 10) throw DataError("line " + std::to_string(lineno) + ": expected 10 columns");
    try {
      RunRecord r;
      r.experiment = cols[0];
      r.env = cols[1];
      r.algo = cols[2];
      r.seed = std::stoi(cols[3]);
      r.horizon = std::stoi(cols[4]);
      r.m = std::stoll(cols[5]);
      r.interactions = std::stoll(cols[6]);
      r.value_gap = std::stod(cols[7]);
      if (!cols[8].empty()) r.l1_error = std::stod(cols[8]);
      r.wall_ms = std::stod(cols[9]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw DataError("line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Slopes and summaries

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
  int floored = 0;  // points whose y was raised to the 1e-12 floor
};

/// Ordinary least squares of ln y on ln x. Needs two distinct x; y at or
/// below 1e-12 is floored there and counted in `floored`. A series with no
/// spread in ln y is fitted exactly, so r^2 = 1.
inline SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  std::set<double> xs;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("fit_loglog_slope: x must be positive");
    if (std::isnan(y)) throw std::invalid_argument("fit_loglog_slope: y is NaN");
    xs.insert(x);
  }
  if (xs.size() < 2) throw std::invalid_argument("fit_loglog_slope: need at least 2 distinct x values");
  SlopeFit fit;
  fit.points = static_cast<int>(points.size());
  std::vector<double> lx, ly;
  for (const auto& [x, y] : points) {
    double yy = y;
    if (yy <= kSlopeFloor) {
      yy = kSlopeFloor;
      ++fit.floored;
    }
    lx.push_back(std::log(x));
    ly.push_back(std::log(yy));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

inline json slope_to_json(const SlopeFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared},
          {"points", f.points}, {"floored", f.floored}};
}

/// Mean and population standard deviation (divide by n).
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  out.n = static_cast<int>(xs.size());
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= out.n;
  double var = 0.0;
  for (double x : xs) var += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(var / out.n);
  return out;
}

inline double axis_value(const RunRecord& r, SweepAxis axis) {
  switch (axis) {
    case SweepAxis::horizon: return r.horizon;
    case SweepAxis::expert_m: return static_cast<double>(r.m);
    case SweepAxis::interactions: return static_cast<double>(r.interactions);
  }
  return 0.0;
}

/// Picks the axis column with the most distinct values across `records`.
inline SweepAxis infer_axis(const std::vector<RunRecord>& records) {
  std::set<double> h, m, n;
  for (const auto& r : records) {
    h.insert(r.horizon);
    m.insert(static_cast<double>(r.m));
    n.insert(static_cast<double>(r.interactions));
  }
  if (n.size() > h.size() && n.size() > m.size()) return SweepAxis::interactions;
  if (h.size() > m.size()) return SweepAxis::horizon;
  return SweepAxis::expert_m;
}

struct GroupStats {
  std::string env, algo;
  double x = 0.0;
  MeanStd gap;
};

struct SlopeEntry {
  std::string env, algo;
  SlopeFit fit;
};

struct Summary {
  SweepAxis axis = SweepAxis::expert_m;
  std::vector<GroupStats> groups;
  std::vector<SlopeEntry> slopes;

  const SlopeEntry* slope(const std::string& env, const std::string& algo) const {
    for (const auto& s : slopes) {
      if (s.env == env && s.algo == algo) return &s;
    }
    return nullptr;
  }
  const GroupStats* group(const std::string& env, const std::string& algo, double x) const {
    for (const auto& g : groups) {
      if (g.env == env && g.algo == algo && g.x == x) return &g;
    }
    return nullptr;
  }
};

/// Per (env, algo, x): mean and population std of value_gap over seeds. Per
/// (env, algo) with at least 2 distinct x: log-log fit of mean gap against x.
/// Groups keep first-appearance order.
inline Summary summarize(const std::vector<RunRecord>& records, SweepAxis axis) {
  detail::require(!records.empty(), "summarize: no records");
  Summary out;
  out.axis = axis;
  std::vector<std::tuple<std::string, std::string, double>> keys;
  std::map<std::tuple<std::string, std::string, double>, std::vector<double>> gaps;
  for (const auto& r : records) {
    auto key = std::make_tuple(r.env, r.algo, axis_value(r, axis));
    auto [it, inserted] = gaps.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(r.value_gap);
  }
  std::vector<std::pair<std::string, std::string>> series;
  for (const auto& key : keys) {
    const auto& [env, algo, x] = key;
    out.groups.push_back({env, algo, x, mean_std(gaps[key])});
    const auto s = std::make_pair(env, algo);
    if (std::find(series.begin(), series.end(), s) == series.end()) series.push_back(s);
  }
  for (const auto& [env, algo] : series) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& g : out.groups) {
      if (g.env == env && g.algo == algo) pts.emplace_back(g.x, g.gap.mean);
    }
    if (pts.size() >= 2) out.slopes.push_back({env, algo, fit_loglog_slope(pts)});
  }
  return out;
}

inline json summary_to_json(const Summary& s) {
  json groups = json::array();
  for (const auto& g : s.groups) {
    groups.push_back({{"env", g.env}, {"algo", g.algo}, {"x", g.x}, {"n", g.gap.n}, {"mean", g.gap.mean},
                      {"std", g.gap.std}});
  }
  json slopes = json::array();
  for (const auto& e : s.slopes) {
    json j = slope_to_json(e.fit);
    j["env"] = e.env;
    j["algo"] = e.algo;
    slopes.push_back(j);
  }
  return {{"axis", to_string(s.axis)},
          {"metric", "value_gap"},
          {"std_convention", "population (divide by n)"},
          {"groups", groups},
          {"slopes", slopes}};
}

// ---------------------------------------------------------------------------
// Serialization of policies and estimates

inline json table_to_json(const StepTable& t) {
  return {{"dims", {t.dims().states, t.dims().actions, t.dims().horizon}},
          {"layout", "h,s,a row-major"},
          {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

inline StepTable table_from_json(const json& j) {
  const auto d = j.at("dims").get<std::vector<int>>();
  detail::require(d.size() == 3, "table_from_json: dims must have 3 entries");
  StepTable t(Dims{d[0], d[1], d[2]}, 0.0);
  const auto v = j.at("values").get<std::vector<double>>();
  detail::require(v.size() == t.values().size(), "table_from_json: value count does not match dims");
  std::copy(v.begin(), v.end(), t.values().begin());
  return t;
}

inline json mixture_to_json(const MixturePolicy& mix) {
  json comps = json::array();
  for (const auto& p : mix.components()) comps.push_back(table_to_json(p.table()));
  return {{"weights", mix.weights()}, {"components", comps}};
}

inline MixturePolicy mixture_from_json(const json& j) {
  std::vector<Policy> comps;
  for (const auto& c : j.at("components")) comps.emplace_back(table_from_json(c));
  return MixturePolicy(std::move(comps), j.at("weights").get<std::vector<double>>());
}

inline std::string trace_to_jsonl(const SolverTrace& trace) {
  std::string out;
  for (const auto& e : trace.entries) {
    json j = {{"iteration", e.iteration}, {"loss", e.loss}, {"grad_norm", e.grad_norm},
              {"step", e.step}, {"best_response_value", e.best_response_value},
              {"weights_hash", e.weights_hash}};
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single runs

inline EnvBundle build_env(const std::string& name, int states, int actions, int horizon, std::int64_t m) {
  if (name == "standard_imitation") return make_standard_imitation(states, actions, horizon);
  if (name == "reset_cliff") {
    detail::require(m <= 2'000'000'000, "build_env: m too large");
    return make_reset_cliff(states, actions, horizon, static_cast<int>(m));
  }
  throw std::invalid_argument("build_env: unknown environment '" + name + "'");
}

struct RunParams {
  std::string algo;
  int iterations = 1;           // T for the solver-based methods
  std::int64_t interactions = 0;  // K for oal, n_total for mbtail
  std::optional<double> gail_eta;
  std::optional<double> oal_policy_step;
  double delta = kDefaultDelta;
  bool record_trace = false;
};

/// Runs one algorithm on `env` with expert data `d`; `rng` feeds any internal randomness.
inline ImitationResult run_algorithm(const EnvBundle& env, const Dataset& d, const RunParams& p, RngStream& rng) {
  SolverConfig cfg;
  cfg.iterations = p.iterations;
  cfg.record_trace = p.record_trace;
  if (p.algo == "bc") return run_bc(env, d);
  if (p.algo == "vail") return run_vail(env, d, cfg);
  if (p.algo == "tail") return run_tail(env, d, cfg, rng);
  if (p.algo == "fem") return run_fem(env, d, cfg);
  if (p.algo == "gtal") return run_gtal(env, d, cfg);
  if (p.algo == "gail") return run_gail(env, d, cfg, p.gail_eta);
  if (p.algo == "oal") {
    OalOptions o;
    o.policy_step = p.oal_policy_step;
    o.delta = p.delta;
    o.record_trace = p.record_trace;
    return run_oal(env, d, p.interactions, rng, o);
  }
  if (p.algo == "mbtail") {
    MbTailOptions o;
    o.delta = p.delta;
    return run_mbtail(env, d, p.interactions, cfg, rng, o);
  }
  throw std::invalid_argument("unknown algorithm '" + p.algo + "'");
}

/// Throws NumericError unless value_gap lies in [-1e-9, sum_h ||P^E_h - P^pi_h||_1 + 1e-9].
inline void check_sandwich(const ImitationResult& r, const std::string& what) {
  if (r.value_gap > r.occupancy_gap + kSandwichTol) {
    throw NumericError(what + ": value gap " + format_double(r.value_gap) + " exceeds occupancy distance " +
                       format_double(r.occupancy_gap));
  }
  if (r.value_gap < -kSandwichTol) {
    throw NumericError(what + ": negative value gap " + format_double(r.value_gap));
  }
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepOptions {
  std::uint64_t master_seed = 0;
  int parallel = 1;
  bool write_outputs = true;
  bool traces = false;
  bool dump_policies = false;
  bool dump_estimates = false;
  bool record_wall_ms = false;  // off by default so records.csv is reproducible byte for byte
  std::optional<std::string> output_dir;  // overrides spec.output_dir
};

struct SweepResult {
  std::vector<RunRecord> records;
  Summary summary;
  std::filesystem::path output_dir;
};

namespace detail {

struct Cell {
  std::size_t algo_index;
  std::size_t grid_index;
  int seed;
};

inline int cell_horizon(const ExperimentSpec& s, std::size_t g) {
  return s.axis == SweepAxis::horizon ? static_cast<int>(s.grid[g]) : s.env.horizon;
}
inline std::int64_t cell_m(const ExperimentSpec& s, std::size_t g) {
  return s.axis == SweepAxis::expert_m ? s.grid[g] : s.env.m;
}
inline std::int64_t cell_budget(const ExperimentSpec& s, std::size_t g) {
  return s.axis == SweepAxis::interactions ? s.grid[g] : s.interactions;
}

/// The expert data depends on (experiment, grid index, seed) only, so every
/// algorithm at a cell sees the same demonstrations.
inline RngStream data_stream(const ExperimentSpec& s, std::uint64_t master, std::size_t g, int seed) {
  return RngStream(master).derive(s.id).derive("expert-data").derive(g).derive(static_cast<std::uint64_t>(seed));
}
inline RngStream algo_stream(const ExperimentSpec& s, std::uint64_t master, const std::string& algo,
                             std::size_t g, int seed) {
  return RngStream(master).derive(s.id).derive("algo:" + algo).derive(g).derive(static_cast<std::uint64_t>(seed));
}

/// Runs `count` independent jobs on up to `workers` threads. The first
/// exception, by job index, is rethrown after all workers finish.
template <class Job>
void parallel_for(std::size_t count, int workers, Job&& job) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::string artifact_name(const std::string& algo, std::size_t g, int seed) {
  return algo + "_g" + std::to_string(g) + "_s" + std::to_string(seed);
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

}  // namespace detail

inline int default_parallelism() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Every (algorithm, grid point, seed) cell, each with a fresh expert dataset.
/// Records come back sorted by (algorithm order, grid index, seed).
inline SweepResult run_sweep(const ExperimentSpec& spec, const SweepOptions& opts = {}) {
  namespace fs = std::filesystem;
  if (spec.algorithms.empty()) throw ConfigError("algorithms", "sweep needs at least one algorithm");
  std::vector<detail::Cell> cells;
  for (std::size_t a = 0; a < spec.algorithms.size(); ++a) {
    for (std::size_t g = 0; g < spec.grid.size(); ++g) {
      for (int s = 0; s < spec.seeds; ++s) cells.push_back({a, g, s});
    }
  }
  fs::path out_dir;
  if (opts.write_outputs) {
    out_dir = detail::prepare_output_dir(opts.output_dir.value_or(spec.output_dir));
    if (opts.traces) fs::create_directories(out_dir / "traces");
    if (opts.dump_policies) fs::create_directories(out_dir / "policies");
    if (opts.dump_estimates) fs::create_directories(out_dir / "estimates");
  }

  std::vector<RunRecord> records(cells.size());
  detail::parallel_for(cells.size(), opts.parallel, [&](std::size_t i) {
    const auto& cell = cells[i];
    const std::string& algo = spec.algorithms[cell.algo_index];
    const int horizon = detail::cell_horizon(spec, cell.grid_index);
    const std::int64_t m = detail::cell_m(spec, cell.grid_index);
    const EnvBundle env = build_env(spec.env.name, spec.env.states, spec.env.actions, horizon, m);
    RngStream data_rng = detail::data_stream(spec, opts.master_seed, cell.grid_index, cell.seed);
    const Dataset d = sample_trajectories(env.mdp, env.expert, static_cast<std::size_t>(m), data_rng);

    RunParams p;
    p.algo = algo;
    if (auto it = spec.iterations.find(algo); it != spec.iterations.end()) p.iterations = it->second.resolve(horizon);
    p.interactions = detail::cell_budget(spec, cell.grid_index);
    p.gail_eta = spec.gail_eta;
    p.oal_policy_step = spec.oal_policy_step;
    p.delta = spec.delta;
    p.record_trace = opts.traces;
    RngStream rng = detail::algo_stream(spec, opts.master_seed, algo, cell.grid_index, cell.seed);

    const auto t0 = std::chrono::steady_clock::now();
    ImitationResult res = run_algorithm(env, d, p, rng);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    check_sandwich(res, spec.id + "/" + algo + "/grid " + std::to_string(cell.grid_index) + "/seed " +
                            std::to_string(cell.seed));

    RunRecord& r = records[i];
    r.experiment = spec.id;
    r.env = env.name;
    r.algo = algo;
    r.seed = cell.seed;
    r.horizon = horizon;
    r.m = m;
    r.interactions = res.interactions;
    r.value_gap = res.value_gap;
    r.l1_error = res.occupancy_gap;
    r.wall_ms = opts.record_wall_ms ? std::round(ms * 1000.0) / 1000.0 : 0.0;

    if (!opts.write_outputs) return;
    const std::string name = detail::artifact_name(algo, cell.grid_index, cell.seed);
    if (opts.traces && res.trace) write_file_atomic(out_dir / "traces" / (name + ".jsonl"), trace_to_jsonl(*res.trace));
    if (opts.dump_policies) {
      json j = {{"record", record_to_json(r)}, {"policy", mixture_to_json(res.policy)}};
      write_file_atomic(out_dir / "policies" / (name + ".json"), j.dump());
    }
    if (opts.dump_estimates && res.target) {
      json j = {{"record", record_to_json(r)}, {"kind", to_string(res.target->kind)},
                {"estimate", table_to_json(res.target->table)}};
      write_file_atomic(out_dir / "estimates" / (name + ".json"), j.dump());
    }
  });

  SweepResult out{std::move(records), {}, out_dir};
  out.summary = summarize(out.records, spec.axis);
  if (opts.write_outputs) {
    write_records_csv(out_dir / "records.csv", out.records);
    write_file_atomic(out_dir / "summary.json", summary_to_json(out.summary).dump(2) + "\n");
    json manifest = {{"tool", "tabail"},
                     {"version", kVersion},
                     {"master_seed", opts.master_seed},
                     {"spec", spec_to_json(spec)},
                     {"records", out.records.size()},
                     {"csv_columns", kCsvHeader},
                     {"wall_ms_recorded", opts.record_wall_ms}};
    write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimator-error studies

inline constexpr const char* kEstimatorCsvHeader = "experiment,env,estimator,seed,H,m,l1_error";

struct EstimatorRecord {
  std::string experiment;
  std::string env;
  EstimateKind estimator = EstimateKind::mle;
  int seed = 0;
  int horizon = 0;
  std::int64_t m = 0;
  double l1_error = 0.0;
};

struct EstimatorStudyResult {
  std::vector<EstimatorRecord> records;
  std::vector<GroupStats> groups;   // algo field holds the estimator name
  std::vector<SlopeEntry> slopes;
};

/// l1 error of each requested estimator against the exact expert occupancy,
/// over the spec's m grid. Estimators at a cell share one dataset.
inline EstimatorStudyResult run_estimator_study(const ExperimentSpec& spec, std::uint64_t master_seed,
                                                int parallel = 1) {
  if (spec.estimators.empty()) throw ConfigError("estimators", "estimator study needs at least one estimator");
  if (spec.axis != SweepAxis::expert_m) throw ConfigError("sweep.axis", "estimator study sweeps expert_m");
  const std::size_t ne = spec.estimators.size();
  const std::size_t cells = spec.grid.size() * static_cast<std::size_t>(spec.seeds);
  std::vector<EstimatorRecord> records(cells * ne);
  detail::parallel_for(cells, parallel, [&](std::size_t i) {
    const std::size_t g = i / spec.seeds;
    const int seed = static_cast<int>(i % spec.seeds);
    const std::int64_t m = spec.grid[g];
    const EnvBundle env = build_env(spec.env.name, spec.env.states, spec.env.actions, spec.env.horizon, m);
    const OccupancyMeasure truth = occupancy(env.mdp, env.expert);
    RngStream data_rng = detail::data_stream(spec, master_seed, g, seed);
    const Dataset d = sample_trajectories(env.mdp, env.expert, static_cast<std::size_t>(m), data_rng);
    for (std::size_t e = 0; e < ne; ++e) {
      const EstimateKind kind = spec.estimators[e];
      double err = 0.0;
      if (kind == EstimateKind::mle) {
        err = l1_estimation_error(mle_estimate(d, env.mdp.dims()), truth);
      } else {
        RngStream split_rng = detail::algo_stream(spec, master_seed, to_string(kind), g, seed);
        err = l1_estimation_error(split_estimate_known(env.mdp, split_dataset(d, split_rng)), truth);
      }
      // Output ordered by (estimator, grid, seed).
      records[e * cells + i] = {spec.id, env.name, kind, seed, spec.env.horizon, m, err};
    }
  });
  EstimatorStudyResult out{std::move(records), {}, {}};
  for (std::size_t e = 0; e < ne; ++e) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t g = 0; g < spec.grid.size(); ++g) {
      std::vector<double> errs;
      for (int s = 0; s < spec.seeds; ++s) errs.push_back(out.records[e * cells + g * spec.seeds + s].l1_error);
      const MeanStd ms = mean_std(errs);
      out.groups.push_back({spec.env.name, to_string(spec.estimators[e]), static_cast<double>(spec.grid[g]), ms});
      pts.emplace_back(static_cast<double>(spec.grid[g]), ms.mean);
    }
    if (pts.size() >= 2) out.slopes.push_back({spec.env.name, to_string(spec.estimators[e]), fit_loglog_slope(pts)});
  }
  return out;
}

inline void write_estimator_csv(const std::filesystem::path& path, const std::vector<EstimatorRecord>& records) {
  std::string text = std::string(kEstimatorCsvHeader) + "\n";
  for (const auto& r : records) {
    text += r.experiment + "," + r.env + "," + to_string(r.estimator) + "," + std::to_string(r.seed) + "," +
            std::to_string(r.horizon) + "," + std::to_string(r.m) + "," + format_double(r.l1_error) + "\n";
  }
  write_file_atomic(path, text);
}

inline json estimator_summary_to_json(const EstimatorStudyResult& r) {
  json groups = json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"env", g.env}, {"estimator", g.algo}, {"m", g.x}, {"n", g.gap.n}, {"mean", g.gap.mean},
                      {"std", g.gap.std}});
  }
  json slopes = json::array();
  for (const auto& e : r.slopes) {
    json j = slope_to_json(e.fit);
    j["env"] = e.env;
    j["estimator"] = e.algo;
    slopes.push_back(j);
  }
  return {{"axis", "expert_m"}, {"metric", "l1_error"}, {"std_convention", "population (divide by n)"},
          {"groups", groups}, {"slopes", slopes}};
}

}  // namespace tabail
