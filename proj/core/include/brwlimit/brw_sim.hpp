#pragma once

// Additive functionals of one branching-random-walk replicate:
//
//   W_n = sum_{|u|=n} e^{-V(u)},   W_{n,beta} = sum e^{-beta V(u)},
//   Z_n = sum V(u) e^{-V(u)},      min_{|u|=n} V(u),   N_n.

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "brwlimit/model.hpp"
#include "brwlimit/rng.hpp"
#include "brwlimit/traversal.hpp"

namespace brwlimit {

struct GenerationFunctionals {
  int n = 0;
  double W = 0.0;
  std::vector<double> betas;
  std::vector<double> W_beta;  // W_beta[i] = W_{n, betas[i]}
  double Z = 0.0;
  double min_V = std::numeric_limits<double>::infinity();
  std::uint64_t particle_count = 0;
  bool extinct = true;
  /// Number of draws used (> 1 only when conditioning on survival).
  int attempts = 1;

  /// W_{n,beta}; Error(kMissingBeta) if beta was not requested.
  double w_beta(double beta) const;
};

struct SimConfig {
  int n = 0;
  std::vector<double> betas{1.0};
  std::uint64_t replicates = 1;
  std::uint64_t master_seed = 0;
  /// Abort guard on stored pending particles; 0 disables it.
  std::size_t particle_cap = 0;
  bool condition_on_survival = false;
  int max_survival_attempts = 10000;
};

/// Contributions e^{-x} with x > kUnderflowExponent are flushed to zero.
inline constexpr double kUnderflowExponent = 700.0;

/// Functionals of the realization driven by `root`.
GenerationFunctionals functionals_from_stream(const OffspringLaw& law, int n,
                                              std::span<const double> betas,
                                              const CounterRng& root, TraversalLimits limits = {});

/// Root stream of attempt `attempt` of replicate `index`.
CounterRng brw_replicate_stream(std::uint64_t master_seed, std::uint64_t index, int attempt = 0);

/// One replicate by depth-first traversal. The randomness depends only on
/// (master_seed, replicate_index). With condition_on_survival, extinct draws
/// are rejected and redrawn (attempts records how many were used).
GenerationFunctionals simulate_functionals(const OffspringLaw& law, const SimConfig& cfg,
                                           std::uint64_t replicate_index);

/// n^{3 beta / 2} W_{n,beta}. Error(kDomain) for n < 1, kMissingBeta.
double rescaled_wbeta(const GenerationFunctionals& f, double beta);

/// min_V - (3/2) ln n. Error(kExtinct) for extinct replicates, kDomain for n < 1.
double recentered_min(const GenerationFunctionals& f);

/// Z_m, the generation-m derivative martingale, as a proxy draw of Z_infinity.
double derivative_limit_sample(const OffspringLaw& law, int m, const CounterRng& stream);
double derivative_limit_sample(const OffspringLaw& law, int m, std::uint64_t seed);

inline constexpr int kDefaultProxyGeneration = 20;

/// One draw of sum_{|u|=1} e^{-beta V(u)} X^{(u)}, the X^{(u)} resampled with
/// replacement from `limit_samples`. Error(kEmptySample) if it is empty.
double star_equation_rhs(const OffspringLaw& law, double beta, std::span<const double> limit_samples,
                         CounterRng& rng);

/// Source of Z_infinity proxy draws: either a fresh generation-m simulation
/// per draw, or resampling from a precomputed pool of such draws.
class ZProxySource {
 public:
  static ZProxySource simulated(const OffspringLaw& law, int m);
  static ZProxySource pooled(std::vector<double> samples);

  double draw(CounterRng& rng) const;
  bool is_pooled() const noexcept { return pool_ != nullptr; }
  std::span<const double> pool() const noexcept;

 private:
  ZProxySource() = default;
  std::shared_ptr<const OffspringLaw> law_;
  int generation_ = kDefaultProxyGeneration;
  std::shared_ptr<const std::vector<double>> pool_;
};

/// `size` independent Z_m draws; draw i uses the stream of index i under the
/// "z-pool" role, so the pool is independent of `workers`.
std::vector<double> make_z_pool(const OffspringLaw& law, int m, std::size_t size,
                                std::uint64_t master_seed, unsigned workers);

}  // namespace brwlimit
