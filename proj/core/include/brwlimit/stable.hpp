#pragma once

// One-sided alpha-stable laws normalized so that E[exp(-theta S)] = exp(-theta^alpha),
// the associated subordinator T, its Poisson jump measure with Levy density
// C_alpha z^{-1-alpha} dz, C_alpha = alpha / Gamma(1 - alpha), and ranked
// Poisson-Dirichlet(alpha, 0) weights.

#include <cstdint>
#include <span>
#include <vector>

#include "brwlimit/rng.hpp"

namespace brwlimit {

struct StableParams {
  double alpha = 0.5;

  /// Error(kDomain) unless 0 < alpha < 1.
  void validate() const;
  /// Levy-density constant alpha / Gamma(1 - alpha).
  double levy_constant() const;
};

/// S = T(1) by Kanter's representation, evaluated in log space. Always > 0.
double sample_stable(const StableParams& p, CounterRng& rng);

/// T(t) = t^{1/alpha} S. Exactly 0 at t = 0; Error(kDomain) for t < 0.
double subordinator_at(const StableParams& p, double t, CounterRng& rng);

struct JumpAtom {
  std::uint64_t cell = 0;
  double z = 0.0;
};

struct BaseMass {
  std::uint64_t cell = 0;
  double w = 0.0;
};

struct PoissonAtoms {
  std::vector<JumpAtom> atoms;
  /// Mean of the discarded jumps below z_min: C W z_min^{1-alpha} / (1 - alpha).
  double small_jump_mean = 0.0;
};

/// All atoms with z > z_min of the Poisson measure with intensity
/// C_alpha (sum_cells w_cell delta_cell) x z^{-1-alpha} dz.
/// Error(kDomain) if z_min <= 0 or some w < 0.
PoissonAtoms poisson_atoms(const StableParams& p, std::span<const BaseMass> base, double z_min,
                           CounterRng& rng);

/// Default truncation 1e-6 * W^{1/alpha}.
double default_truncation(const StableParams& p, double total_mass);

struct PdWeights {
  /// k largest normalized jumps, strictly decreasing.
  std::vector<double> weights;
  /// 1 - sum(weights).
  double residual = 0.0;
  /// Share of the normalizer that comes from the closed-form tail estimate
  /// beyond the K simulated arrivals.
  double tail_fraction = 0.0;
  std::size_t arrivals = 0;
};

/// Ranked jumps z_i = (C_alpha / (alpha Gamma_i))^{1/alpha} of T on [0, 1],
/// normalized by the first K = max(10k, 1e4) jumps plus the mean of the rest.
/// Error(kDomain) if k < 1.
PdWeights pd_weights(const StableParams& p, std::size_t k, CounterRng& rng);

}  // namespace brwlimit
