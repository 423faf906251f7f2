#include "brwlimit/stable.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "brwlimit/errors.hpp"
#include "brwlimit/summation.hpp"

namespace brwlimit {

void StableParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kDomain, "stable index must lie in (0, 1)");
}

double StableParams::levy_constant() const { return alpha / std::tgamma(1.0 - alpha); }

double sample_stable(const StableParams& p, CounterRng& rng) {
  p.validate();
  const double a = p.alpha;
  const double u = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  const double log_s = (a * std::log(std::sin(a * u)) + (1.0 - a) * std::log(std::sin((1.0 - a) * u)) -
                        std::log(std::sin(u))) / a -
                       (1.0 - a) / a * std::log(e);
  return std::exp(log_s);
}

double subordinator_at(const StableParams& p, double t, CounterRng& rng) {
  p.validate();
  if (!(t >= 0.0)) throw Error(ErrorCode::kDomain, "subordinator time must be >= 0");
  if (t == 0.0) return 0.0;
  return std::pow(t, 1.0 / p.alpha) * sample_stable(p, rng);
}

double default_truncation(const StableParams& p, double total_mass) {
  p.validate();
  return 1e-6 * std::pow(total_mass, 1.0 / p.alpha);
}

PoissonAtoms poisson_atoms(const StableParams& p, std::span<const BaseMass> base, double z_min,
                           CounterRng& rng) {
  p.validate();
  if (!(z_min > 0.0)) throw Error(ErrorCode::kDomain, "z_min must be > 0");
  std::vector<double> cumulative;
  cumulative.reserve(base.size());
  CompensatedSum total;
  for (const BaseMass& b : base) {
    if (!(b.w >= 0.0)) throw Error(ErrorCode::kDomain, "base masses must be >= 0");
    total += b.w;
    cumulative.push_back(total.value());
  }
  const double w = total.value();
  PoissonAtoms out;
  if (w == 0.0) return out;
  const double a = p.alpha;
  const double c = p.levy_constant();
  out.small_jump_mean = c * w * std::pow(z_min, 1.0 - a) / (1.0 - a);
  const double mean_count = c * w * std::pow(z_min, -a) / a;
  std::poisson_distribution<long long> count_law(mean_count);
  const long long count = count_law(rng);
  out.atoms.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    const double target = rng.uniform() * w;
    auto j = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), target) -
                                      cumulative.begin());
    // Rounding can push target past the last cumulative value; zero-mass
    // cells must never be chosen.
    if (j == cumulative.size()) {
      do --j;
      while (base[j].w == 0.0);
    }
    const double z = z_min * std::pow(rng.uniform(), -1.0 / a);
    out.atoms.push_back({base[j].cell, z});
  }
  return out;
}

PdWeights pd_weights(const StableParams& p, std::size_t k, CounterRng& rng) {
  p.validate();
  if (k < 1) throw Error(ErrorCode::kDomain, "k must be >= 1");
  const std::size_t arrivals = std::max<std::size_t>(10 * k, 10000);
  const double a = p.alpha;
  const double c = p.levy_constant();
  const double log_scale = std::log(c / a);
  std::vector<double> z(arrivals);
  double gamma = 0.0;
  for (std::size_t i = 0; i < arrivals; ++i) {
    gamma += rng.exponential();
    z[i] = std::exp((log_scale - std::log(gamma)) / a);
  }
  // Jumps below z_K of a unit-time subordinator have mean C z_K^{1-alpha} / (1-alpha).
  const double tail = c * std::pow(z.back(), 1.0 - a) / (1.0 - a);
  CompensatedSum sum;
  for (std::size_t i = arrivals; i-- > 0;) sum += z[i];  // small first
  const double normalizer = sum.value() + tail;
  PdWeights out;
  out.arrivals = arrivals;
  out.tail_fraction = tail / normalizer;
  out.weights.resize(k);
  CompensatedSum kept;
  for (std::size_t i = 0; i < k; ++i) {
    out.weights[i] = z[i] / normalizer;
    kept += out.weights[i];
  }
  out.residual = 1.0 - kept.value();
  return out;
}

}  // namespace brwlimit
