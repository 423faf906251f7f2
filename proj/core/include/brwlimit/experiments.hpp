#pragma once

// Named verification pipelines and their JSON configuration.
//
// Every pipeline is a pure function of its configuration: outputs are built in
// memory, byte-identical for any worker count, and each file embeds the
// canonical configuration (everything except `workers` and `out_dir`).

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brwlimit/model.hpp"

namespace brwlimit {

struct Thresholds {
  double ks_final = 0.05;   // verify-wbeta: KS at the largest generation
  double hill = 0.15;       // verify-wbeta: |alpha_hat - 1/beta|
  double star_ks = 0.02;    // verify-star
  double gibbs_pr = 0.05;   // verify-gibbs: |mean participation ratio - (1 - 1/beta)|
  double gibbs_ks = 0.05;   // verify-gibbs: largest weight and I_0 mass
  double min_ks = 0.1;      // verify-min
};

struct ExperimentConfig {
  std::string experiment;
  nlohmann::json law_spec;
  OffspringLaw law{FixedCount{2}, Gaussian{}};
  std::vector<double> betas{2.0};
  std::vector<int> generations{10, 14, 18};
  int m = 20;
  std::uint64_t replicates = 10000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string out_dir = ".";
  double level = 0.05;
  int depth = 8;
  std::uint64_t samples = 100000;
  std::uint64_t z_pool = 10000;
  std::size_t permutations = 2000;
  /// verify-min pairs (n, 2n) with n below this are reported but not asserted.
  int min_assert_generation = 8;
  Thresholds thresholds;

  /// Configuration as embedded in outputs: every field with defaults filled
  /// in, except workers and out_dir.
  nlohmann::json canonical() const;
};

/// Builds an offspring law from
///   {"count": {"fixed": 2} | {"probabilities": [...]} | {"poisson": mean},
///    "displacement": {"family": "gaussian"|"exponential"|"uniform"|"degenerate", ...},
///    "normalize": bool}
/// Error(kConfig) on malformed specs; normalization errors propagate.
OffspringLaw law_from_json(const nlohmann::json& spec);

/// Validates and fills defaults. `experiment` overrides the config's own name
/// when non-empty. Error(kConfig) on invalid input; the seed is mandatory.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& experiment = "");

/// Applies BRW_WORKERS when set to a positive integer.
void apply_worker_env(ExperimentConfig& cfg);

struct ExperimentResult {
  nlohmann::json report;
  /// File name -> contents, including report.json.
  std::map<std::string, std::string> files;
  bool passed = false;
};

/// Optional precomputed Z_m pool; the pipelines build their own from
/// (seed, m, z_pool) when absent.
using ZPool = std::optional<std::vector<double>>;

ExperimentResult run_verify_wbeta(const ExperimentConfig& cfg, const ZPool& pool = std::nullopt);
ExperimentResult run_verify_star(const ExperimentConfig& cfg, const ZPool& pool = std::nullopt);
ExperimentResult run_verify_gibbs(const ExperimentConfig& cfg, const ZPool& pool = std::nullopt);
ExperimentResult run_verify_min(const ExperimentConfig& cfg);
/// One realization at n = generations.back(), beta = betas.front(), p = depth:
/// cascade, derivative and limit cylinders as CSV and binary files.
ExperimentResult run_sample_cascade(const ExperimentConfig& cfg);
/// Dispatches on cfg.experiment.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// The Z_m pool a pipeline would build for this configuration.
std::vector<double> config_z_pool(const ExperimentConfig& cfg);

/// Writes every file into cfg.out_dir (created if needed). Error(kIo).
void write_outputs(const ExperimentResult& result, const std::string& out_dir);

}  // namespace brwlimit
