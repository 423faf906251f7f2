#pragma once

// Offspring laws of a branching random walk and their log-Laplace function
//
//   psi(t) = ln E[ sum_{|u|=1} exp(-t V(u)) ] = ln E[N] + ln E[exp(-t V)],
//
// for laws made of an offspring-count distribution and i.i.d. displacements.

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "brwlimit/rng.hpp"

namespace brwlimit {

struct FixedCount {
  int children = 2;
};
struct ExplicitCount {
  std::vector<double> probabilities;  // P(N = i) for i = 0..size-1
};
struct PoissonCount {
  double mean = 2.0;
};
using CountLaw = std::variant<FixedCount, ExplicitCount, PoissonCount>;

struct Gaussian {
  double mean = 0.0;
  double variance = 1.0;
};
/// V = shift + direction * X with X ~ Exp(rate); direction is +1 or -1.
struct ShiftedExponential {
  double rate = 1.0;
  double shift = 0.0;
  int direction = 1;
};
struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
};
/// Point mass. Lattice, so only usable for closed-form test oracles.
struct Degenerate {
  double value = 0.0;
};
using Displacement = std::variant<Gaussian, ShiftedExponential, Uniform, Degenerate>;

enum class FamilyTag { kGaussian, kShiftedExponential, kUniform, kDegenerate };

class OffspringLaw {
 public:
  /// Throws Error(kDomain) when the count probabilities do not sum to one
  /// (tolerance 1e-12) or the displacement parameters are invalid.
  OffspringLaw(CountLaw count, Displacement displacement);

  const CountLaw& count() const noexcept { return count_; }
  const Displacement& displacement() const noexcept { return displacement_; }
  FamilyTag family_tag() const noexcept;

  double mean_count() const noexcept;
  /// Largest possible offspring count, or nullopt when unbounded.
  std::optional<int> max_count() const noexcept;
  /// True when every node has at most two children (dyadic cascades).
  bool at_most_binary() const noexcept;
  bool lattice() const noexcept { return family_tag() == FamilyTag::kDegenerate; }

  int sample_count(CounterRng& rng) const;
  double sample_displacement(CounterRng& rng) const;

  std::string describe() const;

 private:
  CountLaw count_;
  Displacement displacement_;
};

/// ln E[exp(-x V)] of a displacement law for any real x (+inf if divergent).
double log_laplace(const Displacement& d, double x);
/// First and second derivatives of log_laplace in x; requires a finite value.
std::pair<double, double> log_laplace_derivatives(const Displacement& d, double x);

/// The law of s*V + a for V ~ d (s != 0).
Displacement affine(const Displacement& d, double scale, double shift);

/// psi(t); Error(kDomain) if t < 0. Returns +inf where the transform diverges.
double psi(const OffspringLaw& law, double t);

/// (psi'(t), psi''(t)). Closed form for every supported family.
/// Error(kDivergence) if psi(t) is infinite.
std::pair<double, double> psi_derivatives(const OffspringLaw& law, double t);

/// psi(t) by adaptive quadrature of the displacement density. Independent of
/// the closed forms; used to cross-check them.
double psi_by_quadrature(const OffspringLaw& law, double t);

struct BoundaryNormalization {
  OffspringLaw law;
  double scale = 1.0;  // s in V -> s V + a
  double shift = 0.0;  // a
  int iterations = 0;
  double residual = 0.0;  // max(|psi(1)|, |psi'(1)|) after normalization
};

/// Solves psi(1) = psi'(1) = 0 over affine maps of the displacement by Newton
/// iteration in (s, a). Analytic Jacobian for Gaussians, central differences
/// otherwise. Error(kSubcritical) if psi(0) <= 0, Error(kNoSolution) after
/// 100 iterations without convergence.
BoundaryNormalization normalize_to_boundary(const OffspringLaw& law);

inline constexpr double kBoundaryTolerance = 1e-10;

struct AssumptionReport {
  double psi0 = 0.0;
  double psi1 = 0.0;
  double psi1_prime = 0.0;
  double psi1_second = 0.0;
  bool supercritical = false;
  bool delta_moment_ok = false;
  bool log_moment_ok = false;
  /// Monte Carlo estimate of E[W~ ln_+(W~)^3] (always computed; approximate).
  double log_moment_estimate = 0.0;
  bool log_moment_estimate_is_approximate = true;
  bool nonlattice_ok = false;
  bool boundary_case = false;
};

/// Never throws for valid (beta > 1, delta > 1); failures are flags.
AssumptionReport check_assumptions(const OffspringLaw& law, double beta, double delta);

}  // namespace brwlimit
