#include "brwlimit/brw_sim.hpp"

#include <array>
#include <cmath>

#include "brwlimit/errors.hpp"
#include "brwlimit/parallel.hpp"
#include "brwlimit/summation.hpp"
#include "exp_kernel.hpp"

namespace brwlimit {
namespace {

bool same_beta(double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)); }

double flushed_exp_neg(double x) { return x > kUnderflowExponent ? 0.0 : std::exp(-x); }


// Buffers leaf positions so the exponentials run through the batch kernel;
// accumulation still happens one leaf at a time in traversal order.
class FunctionalsVisitor {
 public:
  explicit FunctionalsVisitor(std::span<const double> betas) : betas_(betas), w_beta_(betas.size()) {}

  void leaf(double v, std::uint64_t /*path*/) {
    ++count_;
    if (v < min_) min_ = v;
    positions_[buffered_++] = v;
    if (buffered_ == kBatch) flush();
  }

  GenerationFunctionals result(int n) {
    flush();
    GenerationFunctionals f;
    f.n = n;
    f.betas.assign(betas_.begin(), betas_.end());
    f.W_beta.resize(betas_.size());
    for (std::size_t i = 0; i < betas_.size(); ++i) f.W_beta[i] = w_beta_[i].value();
    f.W = w_.value();
    f.Z = z_.value();
    f.min_V = min_;
    f.particle_count = count_;
    f.extinct = count_ == 0;
    return f;
  }

 private:
  static constexpr std::size_t kBatch = 256;

  void flush() {
    if (buffered_ == 0) return;
    detail::exp_neg_batch(positions_.data(), 1.0, weights_.data(), buffered_);
    for (std::size_t i = 0; i < buffered_; ++i) {
      w_ += weights_[i];
      z_ += positions_[i] * weights_[i];
    }
    for (std::size_t b = 0; b < betas_.size(); ++b) {
      if (betas_[b] != 1.0) detail::exp_neg_batch(positions_.data(), betas_[b], scratch_.data(), buffered_);
      const auto& source = betas_[b] == 1.0 ? weights_ : scratch_;
      for (std::size_t i = 0; i < buffered_; ++i) w_beta_[b] += source[i];
    }
    buffered_ = 0;
  }

  std::span<const double> betas_;
  CompensatedSum w_;
  CompensatedSum z_;
  std::vector<CompensatedSum> w_beta_;
  double min_ = std::numeric_limits<double>::infinity();
  std::uint64_t count_ = 0;
  std::array<double, kBatch> positions_{};
  std::array<double, kBatch> weights_{};
  std::array<double, kBatch> scratch_{};
  std::size_t buffered_ = 0;
};

}  // namespace

double GenerationFunctionals::w_beta(double beta) const {
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (same_beta(betas[i], beta)) return W_beta[i];
  }
  throw Error(ErrorCode::kMissingBeta, "beta " + std::to_string(beta) + " was not simulated");
}

GenerationFunctionals functionals_from_stream(const OffspringLaw& law, int n,
                                              std::span<const double> betas,
                                              const CounterRng& root, TraversalLimits limits) {
  FunctionalsVisitor visitor(betas);
  traverse(law, n, root, visitor, limits);
  return visitor.result(n);
}

CounterRng brw_replicate_stream(std::uint64_t master_seed, std::uint64_t index, int attempt) {
  const CounterRng base = replicate_stream(master_seed, "brw", index);
  return attempt == 0 ? base : base.split(static_cast<std::uint64_t>(attempt));
}

GenerationFunctionals simulate_functionals(const OffspringLaw& law, const SimConfig& cfg,
                                           std::uint64_t replicate_index) {
  if (cfg.n < 0) throw Error(ErrorCode::kDomain, "generation must be >= 0");
  if (cfg.betas.empty()) throw Error(ErrorCode::kDomain, "betas must be non-empty");
  if (cfg.replicates < 1) throw Error(ErrorCode::kDomain, "replicates must be >= 1");
  if (replicate_index >= cfg.replicates) {
    throw Error(ErrorCode::kDomain, "replicate index out of range");
  }
  for (double b : cfg.betas) {
    if (!(b >= 1.0)) throw Error(ErrorCode::kDomain, "betas must be >= 1");
  }
  const TraversalLimits limits{cfg.particle_cap};
  const int max_attempts = cfg.condition_on_survival ? std::max(1, cfg.max_survival_attempts) : 1;
  GenerationFunctionals f;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    f = functionals_from_stream(law, cfg.n, cfg.betas,
                                brw_replicate_stream(cfg.master_seed, replicate_index, attempt), limits);
    f.attempts = attempt + 1;
    if (!f.extinct) break;
  }
  return f;
}

double rescaled_wbeta(const GenerationFunctionals& f, double beta) {
  if (f.n < 1) throw Error(ErrorCode::kDomain, "rescaling needs n >= 1");
  const double w = f.w_beta(beta);
  return std::pow(static_cast<double>(f.n), 1.5 * beta) * w;
}

double recentered_min(const GenerationFunctionals& f) {
  if (f.n < 1) throw Error(ErrorCode::kDomain, "recentering needs n >= 1");
  if (f.extinct) throw Error(ErrorCode::kExtinct, "replicate is extinct");
  return f.min_V - 1.5 * std::log(static_cast<double>(f.n));
}

double derivative_limit_sample(const OffspringLaw& law, int m, const CounterRng& stream) {
  return functionals_from_stream(law, m, {}, stream).Z;
}

double derivative_limit_sample(const OffspringLaw& law, int m, std::uint64_t seed) {
  return derivative_limit_sample(law, m, CounterRng(seed));
}

double star_equation_rhs(const OffspringLaw& law, double beta, std::span<const double> limit_samples,
                         CounterRng& rng) {
  if (limit_samples.empty()) throw Error(ErrorCode::kEmptySample, "no limit samples");
  const int children = law.sample_count(rng);
  CompensatedSum sum;
  for (int i = 0; i < children; ++i) {
    const double v = law.sample_displacement(rng);
    const double x = limit_samples[rng.below(limit_samples.size())];
    sum += flushed_exp_neg(beta * v) * x;
  }
  return sum.value();
}

ZProxySource ZProxySource::simulated(const OffspringLaw& law, int m) {
  if (m < 0) throw Error(ErrorCode::kDomain, "proxy generation must be >= 0");
  ZProxySource source;
  source.law_ = std::make_shared<const OffspringLaw>(law);
  source.generation_ = m;
  return source;
}

ZProxySource ZProxySource::pooled(std::vector<double> samples) {
  if (samples.empty()) throw Error(ErrorCode::kEmptySample, "empty Z pool");
  ZProxySource source;
  source.pool_ = std::make_shared<const std::vector<double>>(std::move(samples));
  return source;
}

double ZProxySource::draw(CounterRng& rng) const {
  if (pool_) return (*pool_)[rng.below(pool_->size())];
  return derivative_limit_sample(*law_, generation_, CounterRng(mix64(rng())));
}

std::span<const double> ZProxySource::pool() const noexcept {
  if (!pool_) return {};
  return *pool_;
}

std::vector<double> make_z_pool(const OffspringLaw& law, int m, std::size_t size,
                                std::uint64_t master_seed, unsigned workers) {
  std::vector<double> pool(size);
  parallel_for(size, workers, [&](std::size_t i) {
    pool[i] = derivative_limit_sample(law, m, replicate_stream(master_seed, "z-pool", i));
  });
  return pool;
}

}  // namespace brwlimit
