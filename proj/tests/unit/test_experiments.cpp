#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "brwlimit/cascade.hpp"
#include "brwlimit/errors.hpp"
#include "brwlimit/experiments.hpp"

using namespace brwlimit;
using nlohmann::json;

namespace {

json boundary_law() {
  return {{"count", {{"fixed", 2}}},
          {"displacement", {{"family", "gaussian"}, {"mean", 0.0}, {"variance", 1.0}}},
          {"normalize", true}};
}

json small_config(const std::string& experiment) {
  return {{"experiment", experiment},
          {"law", boundary_law()},
          {"betas", {2.0}},
          {"generations", {4, 6}},
          {"m", 8},
          {"replicates", 300},
          {"samples", 300},
          {"z_pool", 300},
          {"permutations", 99},
          {"depth", 2},
          {"seed", 1234}};
}

ErrorCode config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kDomain;
}

const json* find_check(const json& report, const std::string& name) {
  for (const json& c : report.at("checks")) {
    if (c.at("name") == name) return &c;
  }
  return nullptr;
}

bool has_warning(const json& report, const std::string& w) {
  for (const json& x : report.at("warnings")) {
    if (x == w) return true;
  }
  return false;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("brwlimit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, DefaultsAndCanonicalForm) {
  const ExperimentConfig cfg = parse_config({{"experiment", "verify-wbeta"}, {"law", boundary_law()}, {"seed", 7}});
  EXPECT_EQ(cfg.betas, std::vector<double>{2.0});
  EXPECT_EQ(cfg.generations, (std::vector<int>{10, 14, 18}));
  EXPECT_EQ(cfg.m, 20);
  EXPECT_EQ(cfg.replicates, 10000u);
  EXPECT_EQ(cfg.permutations, 2000u);
  const json c = cfg.canonical();
  EXPECT_FALSE(c.contains("workers"));
  EXPECT_FALSE(c.contains("out_dir"));
  EXPECT_EQ(c.at("seed"), 7);
  EXPECT_EQ(c.at("law_resolved").get<std::string>().rfind("fixed(2) x gaussian(", 0), 0u);
}

TEST(Config, Rejections) {
  json j = small_config("verify-wbeta");
  j.erase("seed");
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-wbeta");
  j["bogus"] = 1;
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-wbeta");
  j["betas"] = {1.0};
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-min");
  j["betas"] = {1.0};
  EXPECT_NO_THROW(parse_config(j));

  j = small_config("verify-wbeta");
  j["generations"] = {0, 4};
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-gibbs");
  j["depth"] = 5;
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-gibbs");
  j["law"]["count"] = {{"poisson", 2.0}};
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-wbeta");
  j["law"]["count"] = {{"probabilities", {0.5, 0.4}}};
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-wbeta");
  j["law"]["displacement"] = {{"family", "cauchy"}};
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-wbeta");
  j["replicates"] = -3;
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-wbeta");
  j["thresholds"] = {{"ks_nope", 0.1}};
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);

  j = small_config("verify-nothing");
  EXPECT_EQ(config_error(j), ErrorCode::kConfig);
}

TEST(Config, SubcriticalLawIsReportedAsSuch) {
  json j = small_config("verify-wbeta");
  j["law"]["count"] = {{"fixed", 1}};
  EXPECT_EQ(config_error(j), ErrorCode::kSubcritical);
}

TEST(Config, WorkerEnvironmentOverride) {
  ExperimentConfig cfg = parse_config(small_config("verify-wbeta"));
  ::setenv("BRW_WORKERS", "3", 1);
  apply_worker_env(cfg);
  EXPECT_EQ(cfg.workers, 3u);
  ::setenv("BRW_WORKERS", "zero", 1);
  EXPECT_THROW(apply_worker_env(cfg), Error);
  ::unsetenv("BRW_WORKERS");
}

TEST(Pipelines, OutputsAreIndependentOfWorkerCount) {
  for (const char* name : {"verify-wbeta", "verify-star", "verify-gibbs", "verify-min", "sample-cascade"}) {
    ExperimentConfig one = parse_config(small_config(name));
    ExperimentConfig four = one;
    four.workers = 4;
    const ExperimentResult a = run_experiment(one);
    const ExperimentResult b = run_experiment(four);
    EXPECT_EQ(a.files, b.files) << name;
    ASSERT_TRUE(a.files.count("report.json")) << name;
  }
}

TEST(Pipelines, FilesEmbedTheCanonicalConfig) {
  const ExperimentConfig cfg = parse_config(small_config("verify-wbeta"));
  const ExperimentResult r = run_experiment(cfg);
  const std::string header = "# config: " + cfg.canonical().dump();
  int csv_files = 0;
  for (const auto& [name, contents] : r.files) {
    if (name.size() < 4 || name.substr(name.size() - 4) != ".csv") continue;
    ++csv_files;
    EXPECT_EQ(contents.substr(0, contents.find('\n')), header) << name;
  }
  EXPECT_GT(csv_files, 0);
  EXPECT_EQ(json::parse(r.files.at("report.json")).at("config"), cfg.canonical());
  EXPECT_TRUE(r.files.count("ecdf_rescaled_b2_n6.csv"));
}

TEST(Pipelines, SmallSamplesCarryAWarning) {
  json j = small_config("verify-wbeta");
  j["replicates"] = 50;
  const ExperimentResult r = run_experiment(parse_config(j));
  EXPECT_TRUE(has_warning(r.report, "insufficient_sample"));
  const ExperimentResult big = run_experiment(parse_config(small_config("verify-wbeta")));
  EXPECT_FALSE(has_warning(big.report, "insufficient_sample"));
}

TEST(Pipelines, StarEquationHoldsExactlyForTheDegenerateLaw) {
  // V == ln 2 with two children makes the proxy constant and the equation an identity in law.
  json j = small_config("verify-star");
  j["law"] = {{"count", {{"fixed", 2}}}, {"displacement", {{"family", "degenerate"}, {"value", std::numbers::ln2}}}};
  j["samples"] = 20000;
  j["z_pool"] = 10;
  j["permutations"] = 0;
  const ExperimentResult r = run_experiment(parse_config(j));
  const json* c = find_check(r.report, "star_ks_b2");
  ASSERT_NE(c, nullptr) << r.report.dump(2);
  EXPECT_TRUE(c->at("passed").get<bool>()) << c->dump();
  EXPECT_TRUE(r.passed);
}

TEST(Pipelines, GibbsAtDepthZeroComparesTotals) {
  json j = small_config("verify-gibbs");
  j["depth"] = 0;
  const ExperimentResult r = run_experiment(parse_config(j));
  const json& g = r.report.at("results").at(0).at("generations").back();
  EXPECT_TRUE(g.contains("scale"));
  EXPECT_TRUE(g.contains("spatial_ks"));
  EXPECT_NE(find_check(r.report, "spatial_ks_b2_n6"), nullptr) << r.report.at("checks").dump();
}

TEST(Pipelines, GibbsHandlesExtinctionHeavyLaws) {
  json j = small_config("verify-gibbs");
  j["law"] = {{"count", {{"probabilities", {0.3, 0.1, 0.6}}}},
              {"displacement", {{"family", "gaussian"}, {"mean", 0.0}, {"variance", 1.0}}},
              {"normalize", true}};
  const ExperimentResult r = run_experiment(parse_config(j));
  const json& g = r.report.at("results").at(0).at("generations").back();
  EXPECT_GT(g.at("extinction_fraction").get<double>(), 0.1);
  EXPECT_LT(g.at("extinction_fraction").get<double>(), 0.9);
  EXPECT_TRUE(g.contains("largest_ks_unconditioned"));
}

TEST(Pipelines, GibbsOnlyAssertsTheLargestGeneration) {
  const ExperimentResult r = run_experiment(parse_config(small_config("verify-gibbs")));
  const json* early = find_check(r.report, "largest_ks_b2_n4");
  const json* late = find_check(r.report, "largest_ks_b2_n6");
  ASSERT_NE(early, nullptr) << r.report.at("checks").dump();
  ASSERT_NE(late, nullptr);
  EXPECT_FALSE(early->at("asserted").get<bool>());
  EXPECT_TRUE(late->at("asserted").get<bool>());
}

TEST(Pipelines, MinimumPairsBelowTheAssertionGenerationAreDiagnostic) {
  json j = small_config("verify-min");
  j["generations"] = {3, 5};
  j["min_assert_generation"] = 5;
  const ExperimentResult r = run_experiment(parse_config(j));
  const json* small = find_check(r.report, "min_ks_n3");
  const json* large = find_check(r.report, "min_ks_n5");
  ASSERT_NE(small, nullptr);
  ASSERT_NE(large, nullptr);
  EXPECT_FALSE(small->at("asserted").get<bool>());
  EXPECT_TRUE(large->at("asserted").get<bool>());
  EXPECT_TRUE(r.files.count("ecdf_min_n10.csv"));
}

TEST(Pipelines, SampleCascadeBinaryFilesRoundTrip) {
  const ExperimentResult r = run_experiment(parse_config(small_config("sample-cascade")));
  for (const char* name : {"cascade", "derivative", "limit"}) {
    std::istringstream in(r.files.at(std::string(name) + ".cylm"));
    const CylinderMasses m = read_binary(in);
    EXPECT_EQ(m.depth, 2);
    EXPECT_EQ(std::string(to_string(m.tag)), name);
    EXPECT_NEAR(m.total(), r.report.at("measures").at(name).at("total").get<double>(),
                1e-12 * std::max(1.0, std::fabs(m.total())));
  }
}

TEST(Pipelines, SharedPoolMatchesTheBuiltInPool) {
  const ExperimentConfig cfg = parse_config(small_config("verify-star"));
  EXPECT_EQ(run_verify_star(cfg).files, run_verify_star(cfg, config_z_pool(cfg)).files);
}

TEST(Outputs, WritesEveryFile) {
  const auto dir = temp_dir("outputs");
  const ExperimentResult r = run_experiment(parse_config(small_config("sample-cascade")));
  write_outputs(r, (dir / "nested").string());
  for (const auto& [name, contents] : r.files) {
    std::ifstream in(dir / "nested" / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), contents) << name;
  }
  std::filesystem::remove_all(dir);
}

#ifdef BRWLIMIT_CLI_PATH
namespace {

int run_cli(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(BRWLIMIT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return -1;
  std::string captured;
  char buffer[4096];
  while (std::fgets(buffer, sizeof buffer, pipe) != nullptr) captured += buffer;
  const int status = ::pclose(pipe);
  if (out != nullptr) *out = captured;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_json(const std::filesystem::path& path, const json& j) { std::ofstream(path) << j.dump(2); }

}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = temp_dir("cli");
  json pass = small_config("verify-star");
  pass["law"] = {{"count", {{"fixed", 2}}}, {"displacement", {{"family", "degenerate"}, {"value", std::numbers::ln2}}}};
  pass["samples"] = 5000;
  pass["permutations"] = 0;
  write_json(dir / "pass.json", pass);
  std::string out;
  EXPECT_EQ(run_cli("verify-star " + (dir / "pass.json").string() + " -o " + (dir / "pass").string(), &out), 0)
      << out;
  EXPECT_TRUE(std::filesystem::exists(dir / "pass" / "report.json"));

  json fail = small_config("verify-wbeta");
  fail["thresholds"] = {{"ks_final", 0.0}};
  write_json(dir / "fail.json", fail);
  EXPECT_EQ(run_cli("verify-wbeta " + (dir / "fail.json").string() + " -o " + (dir / "fail").string(), &out), 1)
      << out;

  json broken = small_config("verify-wbeta");
  broken.erase("seed");
  write_json(dir / "broken.json", broken);
  EXPECT_EQ(run_cli("verify-wbeta " + (dir / "broken.json").string(), &out), 2) << out;
  EXPECT_EQ(run_cli("verify-wbeta " + (dir / "missing.json").string(), &out), 2) << out;
  EXPECT_EQ(run_cli("no-such-command", &out), 2) << out;

  write_json(dir / "law.json", boundary_law());
  EXPECT_EQ(run_cli("check-law " + (dir / "law.json").string() + " --beta 2 --delta 1.5", &out), 0) << out;
  EXPECT_NE(out.find("\"boundary_case\": true"), std::string::npos) << out;
  EXPECT_EQ(run_cli("check-law " + (dir / "law.json").string() + " --beta 0.5", &out), 2) << out;
  std::filesystem::remove_all(dir);
}
#endif  // BRWLIMIT_CLI_PATH
