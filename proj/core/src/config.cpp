#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <string_view>

#include "brwlimit/errors.hpp"
#include "brwlimit/experiments.hpp"

namespace brwlimit {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 5> kExperiments = {"verify-wbeta", "verify-star", "verify-gibbs",
                                                          "verify-min", "sample-cascade"};

constexpr std::array<std::string_view, 17> kKeys = {
    "experiment", "law",     "betas",   "generations",  "m",           "replicates",
    "seed",       "workers", "out_dir", "level",        "depth",       "samples",
    "z_pool",     "permutations",       "min_assert_generation",       "thresholds",
    "comment"};

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

double number(const json& j, const char* key) {
  if (!j.contains(key)) fail(std::string("missing '") + key + "'");
  if (!j.at(key).is_number()) fail(std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

double number_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? number(j, key) : fallback;
}

std::uint64_t unsigned_or(const json& j, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    fail(std::string("'") + key + "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

CountLaw count_from_json(const json& c) {
  if (!c.is_object() || c.size() != 1) fail("law.count must be an object with exactly one of fixed/probabilities/poisson");
  if (c.contains("fixed")) {
    if (!c.at("fixed").is_number_integer()) fail("law.count.fixed must be an integer");
    return FixedCount{c.at("fixed").get<int>()};
  }
  if (c.contains("probabilities")) {
    if (!c.at("probabilities").is_array()) fail("law.count.probabilities must be an array");
    ExplicitCount e;
    for (const json& p : c.at("probabilities")) {
      if (!p.is_number()) fail("law.count.probabilities must hold numbers");
      e.probabilities.push_back(p.get<double>());
    }
    return e;
  }
  if (c.contains("poisson")) return PoissonCount{number(c, "poisson")};
  fail("unknown count law");
}

Displacement displacement_from_json(const json& d) {
  if (!d.is_object() || !d.contains("family") || !d.at("family").is_string()) {
    fail("law.displacement needs a string 'family'");
  }
  const std::string family = d.at("family").get<std::string>();
  if (family == "gaussian") return Gaussian{number(d, "mean"), number(d, "variance")};
  if (family == "exponential") {
    const double direction = number_or(d, "direction", 1.0);
    if (direction != 1.0 && direction != -1.0) fail("exponential direction must be 1 or -1");
    return ShiftedExponential{number(d, "rate"), number_or(d, "shift", 0.0), static_cast<int>(direction)};
  }
  if (family == "uniform") return Uniform{number(d, "lo"), number(d, "hi")};
  if (family == "degenerate") return Degenerate{number(d, "value")};
  fail("unknown displacement family '" + family + "'");
}

bool needs_beta_above_one(const std::string& experiment) {
  return experiment == "verify-wbeta" || experiment == "verify-star" || experiment == "verify-gibbs" ||
         experiment == "sample-cascade";
}

}  // namespace

OffspringLaw law_from_json(const json& spec) {
  if (!spec.is_object()) fail("law must be an object");
  for (const auto& [key, value] : spec.items()) {
    if (key != "count" && key != "displacement" && key != "normalize") fail("unknown law key '" + key + "'");
  }
  if (!spec.contains("count") || !spec.contains("displacement")) fail("law needs count and displacement");
  OffspringLaw law = [&] {
    try {
      return OffspringLaw(count_from_json(spec.at("count")), displacement_from_json(spec.at("displacement")));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfig) throw;
      fail(std::string("invalid law: ") + e.what());
    }
  }();
  const bool normalize = spec.contains("normalize") && spec.at("normalize").is_boolean() && spec.at("normalize").get<bool>();
  if (spec.contains("normalize") && !spec.at("normalize").is_boolean()) fail("law.normalize must be a boolean");
  if (normalize) return normalize_to_boundary(law).law;
  return law;
}

json ExperimentConfig::canonical() const {
  json j;
  j["experiment"] = experiment;
  j["law"] = law_spec;
  j["law_resolved"] = law.describe();
  j["betas"] = betas;
  j["generations"] = generations;
  j["m"] = m;
  j["replicates"] = replicates;
  j["seed"] = seed;
  j["level"] = level;
  j["depth"] = depth;
  j["samples"] = samples;
  j["z_pool"] = z_pool;
  j["permutations"] = permutations;
  j["min_assert_generation"] = min_assert_generation;
  j["thresholds"] = {{"ks_final", thresholds.ks_final}, {"hill", thresholds.hill},
                     {"star_ks", thresholds.star_ks},   {"gibbs_pr", thresholds.gibbs_pr},
                     {"gibbs_ks", thresholds.gibbs_ks}, {"min_ks", thresholds.min_ks}};
  return j;
}

ExperimentConfig parse_config(const json& j, const std::string& experiment) {
  if (!j.is_object()) fail("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) fail("unknown config key '" + key + "'");
  }
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  if (cfg.experiment.empty()) {
    if (!j.contains("experiment") || !j.at("experiment").is_string()) fail("experiment name missing");
    cfg.experiment = j.at("experiment").get<std::string>();
  }
  if (std::find(kExperiments.begin(), kExperiments.end(), cfg.experiment) == kExperiments.end()) {
    fail("unknown experiment '" + cfg.experiment + "'");
  }
  if (!j.contains("seed")) fail("'seed' is mandatory");
  cfg.seed = unsigned_or(j, "seed", 0);
  if (!j.contains("law")) fail("'law' is mandatory");
  cfg.law_spec = j.at("law");
  cfg.law = law_from_json(cfg.law_spec);

  if (j.contains("betas")) {
    if (!j.at("betas").is_array() || j.at("betas").empty()) fail("'betas' must be a non-empty array");
    cfg.betas.clear();
    for (const json& b : j.at("betas")) {
      if (!b.is_number()) fail("'betas' must hold numbers");
      cfg.betas.push_back(b.get<double>());
    }
  }
  for (double b : cfg.betas) {
    if (!(b >= 1.0) || !std::isfinite(b)) fail("betas must be finite and >= 1");
    if (needs_beta_above_one(cfg.experiment) && !(b > 1.0)) fail("limit-law experiments need beta > 1");
  }
  if (j.contains("generations")) {
    if (!j.at("generations").is_array() || j.at("generations").empty()) fail("'generations' must be a non-empty array");
    cfg.generations.clear();
    for (const json& g : j.at("generations")) {
      if (!g.is_number_integer()) fail("'generations' must hold integers");
      cfg.generations.push_back(g.get<int>());
    }
  }
  for (int g : cfg.generations) {
    if (g < 1 || g > 40) fail("generations must lie in [1, 40]");
  }
  cfg.m = static_cast<int>(unsigned_or(j, "m", static_cast<std::uint64_t>(cfg.m)));
  if (cfg.m > 40) fail("'m' must be <= 40");
  cfg.replicates = unsigned_or(j, "replicates", cfg.replicates);
  if (cfg.replicates < 1) fail("'replicates' must be >= 1");
  cfg.workers = static_cast<unsigned>(unsigned_or(j, "workers", cfg.workers));
  if (cfg.workers < 1) fail("'workers' must be >= 1");
  if (j.contains("out_dir")) {
    if (!j.at("out_dir").is_string()) fail("'out_dir' must be a string");
    cfg.out_dir = j.at("out_dir").get<std::string>();
  }
  cfg.level = number_or(j, "level", cfg.level);
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) fail("'level' must lie in (0, 1)");
  cfg.depth = static_cast<int>(unsigned_or(j, "depth", static_cast<std::uint64_t>(cfg.depth)));
  if (cfg.depth > 24) fail("'depth' must be <= 24");
  if ((cfg.experiment == "verify-gibbs" || cfg.experiment == "sample-cascade")) {
    for (int g : cfg.generations) {
      if (cfg.depth > g) fail("'depth' must not exceed any generation");
    }
    if (!cfg.law.at_most_binary()) fail("cascade experiments need at most two children per node");
  }
  cfg.samples = unsigned_or(j, "samples", cfg.samples);
  if (cfg.samples < 1) fail("'samples' must be >= 1");
  cfg.z_pool = unsigned_or(j, "z_pool", cfg.z_pool);
  if (cfg.z_pool < 1) fail("'z_pool' must be >= 1");
  cfg.permutations = static_cast<std::size_t>(unsigned_or(j, "permutations", cfg.permutations));
  cfg.min_assert_generation =
      static_cast<int>(unsigned_or(j, "min_assert_generation", static_cast<std::uint64_t>(cfg.min_assert_generation)));
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    if (!t.is_object()) fail("'thresholds' must be an object");
    for (const auto& [key, value] : t.items()) {
      if (key != "ks_final" && key != "hill" && key != "star_ks" && key != "gibbs_pr" && key != "gibbs_ks" &&
          key != "min_ks") {
        fail("unknown threshold '" + key + "'");
      }
    }
    cfg.thresholds.ks_final = number_or(t, "ks_final", cfg.thresholds.ks_final);
    cfg.thresholds.hill = number_or(t, "hill", cfg.thresholds.hill);
    cfg.thresholds.star_ks = number_or(t, "star_ks", cfg.thresholds.star_ks);
    cfg.thresholds.gibbs_pr = number_or(t, "gibbs_pr", cfg.thresholds.gibbs_pr);
    cfg.thresholds.gibbs_ks = number_or(t, "gibbs_ks", cfg.thresholds.gibbs_ks);
    cfg.thresholds.min_ks = number_or(t, "min_ks", cfg.thresholds.min_ks);
  }
  return cfg;
}

void apply_worker_env(ExperimentConfig& cfg) {
  const char* value = std::getenv("BRW_WORKERS");
  if (value == nullptr || *value == '\0') return;
  char* end = nullptr;
  const unsigned long workers = std::strtoul(value, &end, 10);
  if (*end != '\0' || workers < 1 || workers > 4096) fail("BRW_WORKERS must be a positive integer");
  cfg.workers = static_cast<unsigned>(workers);
}

}  // namespace brwlimit
