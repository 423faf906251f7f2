// brwlimit command-line driver.
//
// Exit codes: 0 all asserted checks pass, 1 statistical failure,
// 2 configuration or runtime error.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "brwlimit/errors.hpp"
#include "brwlimit/experiments.hpp"
#include "brwlimit/model.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kStatisticalFailure = 1;
constexpr int kError = 2;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw brwlimit::Error(brwlimit::ErrorCode::kIo, "cannot open " + path);
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw brwlimit::Error(brwlimit::ErrorCode::kConfig, path + ": " + e.what());
  }
}

int run_experiment(const std::string& name, const std::string& config_path, const std::string& out_dir) {
  brwlimit::ExperimentConfig cfg = brwlimit::parse_config(load_json(config_path), name);
  brwlimit::apply_worker_env(cfg);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const brwlimit::ExperimentResult result = brwlimit::run_experiment(cfg);
  brwlimit::write_outputs(result, cfg.out_dir);
  for (const auto& c : result.report.at("checks")) {
    std::cout << (c.at("passed").get<bool>() ? "ok   " : "FAIL ") << c.at("name").get<std::string>();
    if (c.contains("value")) std::cout << " value=" << c.at("value").dump() << " threshold=" << c.at("threshold").dump();
    if (c.contains("error")) std::cout << " error=" << c.at("error").get<std::string>();
    if (!c.at("asserted").get<bool>()) std::cout << " (diagnostic)";
    std::cout << '\n';
  }
  std::cout << "report: " << cfg.out_dir << "/report.json\n";
  return result.passed ? kPass : kStatisticalFailure;
}

int check_law(const std::string& law_path, double beta, double delta) {
  if (!(beta > 1.0) || !(delta > 1.0)) {
    throw brwlimit::Error(brwlimit::ErrorCode::kConfig, "check-law needs beta > 1 and delta > 1");
  }
  nlohmann::json spec = load_json(law_path);
  if (spec.contains("law")) spec = spec.at("law");
  const brwlimit::OffspringLaw law = brwlimit::law_from_json(spec);
  const brwlimit::AssumptionReport r = brwlimit::check_assumptions(law, beta, delta);
  const nlohmann::json out{{"law", law.describe()},
                           {"beta", beta},
                           {"delta", delta},
                           {"psi0", r.psi0},
                           {"psi1", r.psi1},
                           {"psi1_prime", r.psi1_prime},
                           {"psi1_second", r.psi1_second},
                           {"supercritical", r.supercritical},
                           {"delta_moment_ok", r.delta_moment_ok},
                           {"log_moment_ok", r.log_moment_ok},
                           {"log_moment_estimate", r.log_moment_estimate},
                           {"log_moment_estimate_is_approximate", r.log_moment_estimate_is_approximate},
                           {"nonlattice_ok", r.nonlattice_ok},
                           {"boundary_case", r.boundary_case}};
  std::cout << out.dump(2) << '\n';
  const bool ok = r.supercritical && r.boundary_case && r.delta_moment_ok && r.log_moment_ok && r.nonlattice_ok;
  return ok ? kPass : kStatisticalFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching random walk and cascade limit-law verification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  for (const char* name : {"verify-wbeta", "verify-star", "verify-gibbs", "verify-min", "sample-cascade"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("Run the ") + name + " pipeline");
    sub->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out-dir", out_dir, "Output directory (overrides out_dir in the config)");
  }
  double beta = 2.0;
  double delta = 1.5;
  CLI::App* check = app.add_subcommand("check-law", "Report psi and the standing assumptions for a law");
  check->add_option("law", config_path, "JSON file with a law spec (or a config containing one)")
      ->required()
      ->check(CLI::ExistingFile);
  check->add_option("--beta", beta, "Inverse temperature beta > 1")->check(CLI::PositiveNumber);
  check->add_option("--delta", delta, "Moment exponent delta > 1")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kError;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == check) return check_law(config_path, beta, delta);
    return run_experiment(sub->get_name(), config_path, out_dir);
  } catch (const brwlimit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
}
