// Drives the built tabail binary through a shell and checks exit codes and output.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;  // stdout only
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tabail_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  const fs::path err_file = fs::temp_directory_path() / ("tabail_cli_stderr_" + std::to_string(counter++));
  const std::string cmd =
      env_prefix + " \"" + std::string(TABAIL_CLI_PATH) + "\" " + args + " 2>\"" + err_file.string() + "\"";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err_file);
  fs::remove(err_file);
  return r;
}

json parse_stdout(const Result& r) { return json::parse(r.out); }

}  // namespace

TEST(Cli, HelpExitsZero) {
  const Result r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("sweep"), std::string::npos);
}

TEST(Cli, RunBcReportsNoInteractions) {
  const Result r = run("run --env standard-imitation --S 20 --A 3 --H 5 --m 10 --algo bc --seed 3");
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = parse_stdout(r);
  EXPECT_EQ(j.at("interactions"), 0);
  EXPECT_EQ(j.at("algo"), "bc");
  EXPECT_GE(j.at("value_gap").get<double>(), 0.0);
  EXPECT_LE(j.at("value_gap").get<double>(), j.at("l1_error").get<double>() + 1e-9);
}

TEST(Cli, MbTailSpendsTheWholeBudget) {
  const Result r = run("run --env reset-cliff --S 6 --A 3 --H 4 --m 20 --algo mbtail --budget 10000 --T 50");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_stdout(r).at("interactions"), 10000);
}

TEST(Cli, SameSeedSameRun) {
  const std::string args = "run --env reset-cliff --S 6 --A 3 --H 4 --m 20 --algo tail --T 30 --seed 9";
  const json a = parse_stdout(run(args));
  const json b = parse_stdout(run(args));
  EXPECT_EQ(a.at("value_gap"), b.at("value_gap"));
}

TEST(Cli, NegativeMIsAUsageError) {
  const Result r = run("run --S 5 --m -3 --algo bc");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--m"), std::string::npos) << r.err;
}

TEST(Cli, UnknownFlagIsAUsageError) {
  EXPECT_EQ(run("run --S 5 --m 3 --algo bc --frobnicate").code, 2);
  EXPECT_EQ(run("run --S 5 --m 3 --algo nope").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST(Cli, MissingBudgetIsAUsageError) {
  const Result r = run("run --S 5 --m 3 --algo oal");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--budget"), std::string::npos);
}

TEST(Cli, MissingSpecFileIsAUsageError) {
  const Result r = run("sweep --spec /nonexistent/spec.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/spec.json"), std::string::npos);
}

TEST(Cli, BadSpecNamesTheField) {
  const fs::path dir = scratch("badspec");
  fs::create_directories(dir);
  std::ofstream(dir / "spec.json") << R"({"id": "x", "env": {"name": "standard_imitation", "states": 4,
    "actions": 2, "horizon": 3}, "sweep": {"axis": "expert_m", "values": [8, 4]}, "algorithms": ["bc"]})";
  const Result r = run("sweep --spec " + (dir / "spec.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("sweep.values[1]"), std::string::npos) << r.err;
}

TEST(Cli, PresetsAreListedAndLoad) {
  const Result r = run("sweep --list-presets");
  ASSERT_EQ(r.code, 0);
  const json names = parse_stdout(r);
  EXPECT_NE(std::find(names.begin(), names.end(), "fig-bandit-m"), names.end());
}

TEST(Cli, SweepIsDeterministicAndHonoursTheSeedVariable) {
  const fs::path dir = scratch("sweep");
  fs::create_directories(dir);
  std::ofstream(dir / "spec.json") << R"({"id": "cli", "env": {"name": "reset_cliff", "states": 5,
    "actions": 3, "horizon": 4}, "sweep": {"axis": "expert_m", "values": [4, 16]},
    "algorithms": ["bc", "tail"], "iterations": {"tail": "4H"}, "seeds": 3})";
  const std::string spec = (dir / "spec.json").string();
  const Result a = run("sweep --spec " + spec + " --out " + (dir / "a").string() + " --seed 7");
  ASSERT_EQ(a.code, 0) << a.err;
  const Result b = run("sweep --spec " + spec + " --out " + (dir / "b").string() + " --parallel 2", "TAB_AIL_SEED=7");
  ASSERT_EQ(b.code, 0) << b.err;
  const Result c = run("sweep --spec " + spec + " --out " + (dir / "c").string() + " --seed 8");
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(slurp(dir / "a" / "records.csv"), slurp(dir / "b" / "records.csv"));
  EXPECT_NE(slurp(dir / "a" / "records.csv"), slurp(dir / "c" / "records.csv"));
  EXPECT_EQ(parse_stdout(a).at("records"), 12);
  EXPECT_EQ(parse_stdout(b).at("master_seed"), 7);

  const Result s = run("slopes --csv " + (dir / "a" / "records.csv").string());
  ASSERT_EQ(s.code, 0) << s.err;
  const json summary = parse_stdout(s);
  EXPECT_EQ(summary.at("axis"), "expert_m");
  EXPECT_EQ(summary.at("slopes").size(), 2u);

  EXPECT_EQ(run("sweep --spec " + spec + " --out " + (dir / "d").string(), "TAB_AIL_SEED=abc").code, 2);
}

TEST(Cli, EnvAndEstimatorCommandsPrintJson) {
  const Result e = run("env --env reset-cliff --S 5 --A 2 --H 3 --m 10 --full");
  ASSERT_EQ(e.code, 0) << e.err;
  const json j = parse_stdout(e);
  EXPECT_EQ(j.at("states"), 5);
  EXPECT_TRUE(j.contains("transitions"));

  const Result est = run("estimator-error --S 6 --A 2 --H 3 --m-grid 4,8,16 --seeds 3 --seed 1");
  ASSERT_EQ(est.code, 0) << est.err;
  EXPECT_EQ(parse_stdout(est).at("slopes").size(), 2u);
  EXPECT_EQ(run("estimator-error --S 6 --m-grid 8,4").code, 2);
}

TEST(Cli, MissingCsvIsARuntimeError) {
  EXPECT_EQ(run("slopes --csv /nonexistent/records.csv").code, 1);
}
