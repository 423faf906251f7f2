#pragma once

// Distribution-level tools for heavy-tailed samples: two-sample KS with
// permutation p-values, empirical Laplace transforms, Hill tail index and
// median-ratio scale estimates. No routine here relies on finite means.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace brwlimit {

struct TestReport {
  std::string statistic_name;
  double statistic_value = 0.0;
  double p_value = 1.0;
  std::vector<std::size_t> sample_sizes;
  std::vector<std::uint64_t> seeds;
  double level = 0.05;
  /// True when the null is rejected at `level` (p_value < level).
  bool reject = false;
  std::map<std::string, std::string> metadata;
};

/// sup_x |F_a(x) - F_b(x)|, evaluated at the end of each run of tied values.
double ks_statistic(std::span<const double> a, std::span<const double> b);

/// Asymptotic Kolmogorov p-value for a two-sample distance (Stephens' correction).
double ks_asymptotic_p_value(double d, std::size_t n, std::size_t m);

struct KsOptions {
  /// Label permutations for the p-value; 0 selects the asymptotic p-value.
  std::size_t permutations = 2000;
  std::uint64_t seed = 0;
  double level = 0.05;
  unsigned workers = 1;
};

/// Two-sample KS test. The permutation p-value is (1 + #{D* >= D}) / (B + 1),
/// exact under exchangeability and valid with ties. Error(kEmptySample).
TestReport ks_two_sample(std::span<const double> a, std::span<const double> b, const KsOptions& opts = {});

struct LaplacePoint {
  double theta = 0.0;
  double value = 0.0;
  double standard_error = 0.0;
};

/// mean exp(-theta X) with its standard error per theta.
/// Error(kDomain) for negative samples or theta, kEmptySample.
std::vector<LaplacePoint> empirical_laplace(std::span<const double> samples, std::span<const double> thetas);

struct HillEstimate {
  double alpha = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t k = 0;
};

/// floor(N^{2/3}).
std::size_t default_hill_k(std::size_t n);

/// Hill estimator on the k largest order statistics (k = 0 selects the
/// default), with CI alpha (1 -+ 1.96 / sqrt(k)). Error(kDomain) unless
/// 1 <= k < N and the top k + 1 values are positive; kDegenerate if they are all equal.
HillEstimate hill_tail_index(std::span<const double> samples, std::size_t k = 0);

/// Type-7 (linear interpolation) sample quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

struct ScaleEstimate {
  double c = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double q25_ratio = 0.0;
  double q75_ratio = 0.0;
};

struct ScaleOptions {
  std::size_t resamples = 1000;
  std::uint64_t seed = 0;
  double confidence = 0.95;
};

/// c = median(a) / median(b) with a percentile-bootstrap CI and the
/// corresponding quartile ratios. Error(kDegenerate) on a zero median,
/// kEmptySample, kDomain for negative values.
ScaleEstimate estimate_scale(std::span<const double> a, std::span<const double> b, const ScaleOptions& opts = {});

struct EcdfPoint {
  double x = 0.0;
  double f = 0.0;
};

/// ECDF at each distinct value of the sample (right-continuous steps).
std::vector<EcdfPoint> ecdf(std::span<const double> samples);

}  // namespace brwlimit
