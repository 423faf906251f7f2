#include "brwlimit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>

#include "brwlimit/errors.hpp"
#include "brwlimit/parallel.hpp"
#include "brwlimit/rng.hpp"
#include "brwlimit/summation.hpp"

namespace brwlimit {
namespace {

void require_nonempty(std::span<const double> a, const char* what) {
  if (a.empty()) throw Error(ErrorCode::kEmptySample, what);
}

// Pooled sample in sorted order. run_end[i] marks the last element of a run of
// equal values; the ECDF difference may only be read there.
struct Pooled {
  std::vector<std::uint8_t> from_a;
  std::vector<std::uint8_t> run_end;
};

Pooled pool(std::span<const double> a, std::span<const double> b) {
  std::vector<std::pair<double, std::uint8_t>> all;
  all.reserve(a.size() + b.size());
  for (double x : a) all.emplace_back(x, 1);
  for (double x : b) all.emplace_back(x, 0);
  std::sort(all.begin(), all.end());
  Pooled p;
  p.from_a.resize(all.size());
  p.run_end.resize(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    p.from_a[i] = all[i].second;
    p.run_end[i] = i + 1 == all.size() || all[i + 1].first != all[i].first;
  }
  return p;
}

// max |ca m - cb n| over run ends: the KS distance times n m, in integers.
std::int64_t scaled_distance(const std::vector<std::uint8_t>& from_a, const std::vector<std::uint8_t>& run_end,
                             std::int64_t n, std::int64_t m) {
  std::int64_t ca = 0;
  std::int64_t cb = 0;
  std::int64_t best = 0;
  for (std::size_t i = 0; i < from_a.size(); ++i) {
    ca += from_a[i];
    cb += 1 - from_a[i];
    if (run_end[i]) best = std::max(best, std::abs(ca * m - cb * n));
  }
  return best;
}

std::vector<double> sorted_copy(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return s;
}

double median_of(std::vector<double>& x) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, 0.5);
}

}  // namespace

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, "first sample is empty");
  require_nonempty(b, "second sample is empty");
  const Pooled p = pool(a, b);
  const auto n = static_cast<std::int64_t>(a.size());
  const auto m = static_cast<std::int64_t>(b.size());
  return static_cast<double>(scaled_distance(p.from_a, p.run_end, n, m)) / static_cast<double>(n * m);
}

double ks_asymptotic_p_value(double d, std::size_t n, std::size_t m) {
  const double ne = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
  const double root = std::sqrt(ne);
  const double lambda = (root + 0.12 + 0.11 / root) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

TestReport ks_two_sample(std::span<const double> a, std::span<const double> b, const KsOptions& opts) {
  require_nonempty(a, "first sample is empty");
  require_nonempty(b, "second sample is empty");
  const Pooled p = pool(a, b);
  const auto n = static_cast<std::int64_t>(a.size());
  const auto m = static_cast<std::int64_t>(b.size());
  const std::int64_t observed = scaled_distance(p.from_a, p.run_end, n, m);

  TestReport r;
  r.statistic_name = "ks_two_sample";
  r.statistic_value = static_cast<double>(observed) / static_cast<double>(n * m);
  r.sample_sizes = {a.size(), b.size()};
  r.seeds = {opts.seed};
  r.level = opts.level;
  if (opts.permutations == 0) {
    r.p_value = ks_asymptotic_p_value(r.statistic_value, a.size(), b.size());
    r.metadata["p_value_method"] = "asymptotic";
  } else {
    constexpr std::size_t kChunk = 32;
    const std::size_t chunks = (opts.permutations + kChunk - 1) / kChunk;
    std::vector<std::size_t> exceed(chunks, 0);
    parallel_for(chunks, opts.workers, [&](std::size_t c) {
      std::vector<std::uint8_t> labels;
      const std::size_t end = std::min(opts.permutations, (c + 1) * kChunk);
      for (std::size_t i = c * kChunk; i < end; ++i) {
        labels = p.from_a;
        CounterRng rng = replicate_stream(opts.seed, "ks-permutation", i);
        for (std::size_t j = labels.size(); j > 1; --j) std::swap(labels[j - 1], labels[rng.below(j)]);
        if (scaled_distance(labels, p.run_end, n, m) >= observed) ++exceed[c];
      }
    });
    const std::size_t total = std::accumulate(exceed.begin(), exceed.end(), std::size_t{0});
    r.p_value = static_cast<double>(1 + total) / static_cast<double>(opts.permutations + 1);
    r.metadata["p_value_method"] = "permutation";
    r.metadata["permutations"] = std::to_string(opts.permutations);
  }
  r.reject = r.p_value < r.level;
  return r;
}

std::vector<LaplacePoint> empirical_laplace(std::span<const double> samples, std::span<const double> thetas) {
  require_nonempty(samples, "no samples");
  for (double x : samples) {
    if (!(x >= 0.0)) throw Error(ErrorCode::kDomain, "Laplace transform needs nonnegative samples");
  }
  const auto count = static_cast<double>(samples.size());
  std::vector<LaplacePoint> out;
  out.reserve(thetas.size());
  for (double theta : thetas) {
    if (!(theta >= 0.0)) throw Error(ErrorCode::kDomain, "theta must be >= 0");
    CompensatedSum s;
    CompensatedSum s2;
    for (double x : samples) {
      const double e = theta == 0.0 ? 1.0 : std::exp(-theta * x);
      s += e;
      s2 += e * e;
    }
    const double mean = s.value() / count;
    const double var = samples.size() > 1 ? std::max(0.0, (s2.value() - count * mean * mean) / (count - 1.0)) : 0.0;
    out.push_back({theta, mean, std::sqrt(var / count)});
  }
  return out;
}

std::size_t default_hill_k(std::size_t n) {
  auto k = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 2.0 / 3.0)));
  // Guard against pow rounding just below an exact cube.
  while (k > 0 && k * k * k > n * n) --k;
  while ((k + 1) * (k + 1) * (k + 1) <= n * n) ++k;
  return k;
}

HillEstimate hill_tail_index(std::span<const double> samples, std::size_t k) {
  require_nonempty(samples, "no samples");
  if (k == 0) k = default_hill_k(samples.size());
  if (k < 1 || k >= samples.size()) throw Error(ErrorCode::kDomain, "need 1 <= k < sample size");
  std::vector<double> x(samples.begin(), samples.end());
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k), x.end(), std::greater<>());
  const double threshold = x[k];
  if (!(threshold > 0.0)) throw Error(ErrorCode::kDomain, "Hill estimator needs positive top order statistics");
  CompensatedSum s;
  for (std::size_t i = 0; i < k; ++i) s += std::log(x[i] / threshold);
  const double gamma = s.value() / static_cast<double>(k);
  if (!(gamma > 0.0)) throw Error(ErrorCode::kDegenerate, "top order statistics are all equal");
  HillEstimate h;
  h.k = k;
  h.alpha = 1.0 / gamma;
  const double half = 1.96 / std::sqrt(static_cast<double>(k));
  h.ci_low = h.alpha * (1.0 - half);
  h.ci_high = h.alpha * (1.0 + half);
  return h;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  require_nonempty(sorted, "no samples");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::kDomain, "quantile level must lie in [0, 1]");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ScaleEstimate estimate_scale(std::span<const double> a, std::span<const double> b, const ScaleOptions& opts) {
  require_nonempty(a, "first sample is empty");
  require_nonempty(b, "second sample is empty");
  for (double x : a) {
    if (!(x >= 0.0)) throw Error(ErrorCode::kDomain, "scale estimation needs nonnegative samples");
  }
  for (double x : b) {
    if (!(x >= 0.0)) throw Error(ErrorCode::kDomain, "scale estimation needs nonnegative samples");
  }
  const std::vector<double> sa = sorted_copy(a);
  const std::vector<double> sb = sorted_copy(b);
  const double ma = quantile_sorted(sa, 0.5);
  const double mb = quantile_sorted(sb, 0.5);
  if (ma == 0.0 || mb == 0.0) throw Error(ErrorCode::kDegenerate, "zero median");
  ScaleEstimate e;
  e.c = ma / mb;
  const double qb25 = quantile_sorted(sb, 0.25);
  const double qb75 = quantile_sorted(sb, 0.75);
  e.q25_ratio = qb25 > 0.0 ? quantile_sorted(sa, 0.25) / qb25 : std::numeric_limits<double>::quiet_NaN();
  e.q75_ratio = quantile_sorted(sa, 0.75) / qb75;

  if (opts.resamples == 0) {
    e.ci_low = e.ci_high = e.c;
    return e;
  }
  std::vector<double> ratios;
  ratios.reserve(opts.resamples);
  std::vector<double> ra(a.size());
  std::vector<double> rb(b.size());
  for (std::size_t i = 0; i < opts.resamples; ++i) {
    CounterRng rng = replicate_stream(opts.seed, "scale-bootstrap", i);
    for (double& x : ra) x = sa[rng.below(sa.size())];
    for (double& x : rb) x = sb[rng.below(sb.size())];
    const double num = median_of(ra);
    const double den = median_of(rb);
    if (den > 0.0) ratios.push_back(num / den);
  }
  if (ratios.empty()) throw Error(ErrorCode::kDegenerate, "every bootstrap median was zero");
  std::sort(ratios.begin(), ratios.end());
  const double tail = (1.0 - opts.confidence) / 2.0;
  e.ci_low = quantile_sorted(ratios, tail);
  e.ci_high = quantile_sorted(ratios, 1.0 - tail);
  return e;
}

std::vector<EcdfPoint> ecdf(std::span<const double> samples) {
  const std::vector<double> s = sorted_copy(samples);
  std::vector<EcdfPoint> out;
  const auto n = static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 == s.size() || s[i + 1] != s[i]) out.push_back({s[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

}  // namespace brwlimit
