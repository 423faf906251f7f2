#include "brwlimit/model.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "brwlimit/errors.hpp"

namespace brwlimit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// ln((1 - e^{-y}) / y), the log-Laplace transform of U(0,1) at y.
double log_uniform_laplace(double y) {
  const double ay = std::fabs(y);
  if (ay < 1e-5) return -0.5 * y + y * y / 24.0;
  if (y > 0) return std::log(-std::expm1(-y)) - std::log(y);
  // y < 0: (e^{|y|} - 1) / |y|
  if (ay > 700.0) return ay + std::log1p(-std::exp(-ay)) - std::log(ay);
  return std::log(std::expm1(ay)) - std::log(ay);
}

// First and second derivative of log_uniform_laplace.
std::pair<double, double> log_uniform_laplace_derivatives(double y) {
  if (std::fabs(y) < 1e-3) {
    const double y2 = y * y;
    return {-0.5 + y / 12.0 - y * y2 / 720.0, 1.0 / 12.0 - y2 / 240.0 + y2 * y2 / 6048.0};
  }
  const double em1 = std::expm1(y);
  const double first = 1.0 / em1 - 1.0 / y;
  const double second = 1.0 / (y * y) - 1.0 / (em1 * -std::expm1(-y));
  return {first, second};
}

double count_probability_sum(const std::vector<double>& p) {
  return std::accumulate(p.begin(), p.end(), 0.0);
}

void validate(const CountLaw& count) {
  std::visit(Overloaded{
                 [](const FixedCount& c) {
                   if (c.children < 0) throw Error(ErrorCode::kDomain, "negative offspring count");
                 },
                 [](const ExplicitCount& c) {
                   if (c.probabilities.empty()) {
                     throw Error(ErrorCode::kDomain, "empty offspring distribution");
                   }
                   for (double p : c.probabilities) {
                     if (!(p >= 0.0) || !std::isfinite(p)) {
                       throw Error(ErrorCode::kDomain, "offspring probabilities must be >= 0");
                     }
                   }
                   if (std::fabs(count_probability_sum(c.probabilities) - 1.0) > 1e-12) {
                     throw Error(ErrorCode::kDomain, "offspring probabilities must sum to 1");
                   }
                 },
                 [](const PoissonCount& c) {
                   if (!(c.mean > 0.0) || c.mean > 500.0) {
                     throw Error(ErrorCode::kDomain, "Poisson mean must lie in (0, 500]");
                   }
                 },
             },
             count);
}

void validate(const Displacement& d) {
  std::visit(Overloaded{
                 [](const Gaussian& g) {
                   if (!std::isfinite(g.mean) || !(g.variance > 0.0) || !std::isfinite(g.variance)) {
                     throw Error(ErrorCode::kDomain, "Gaussian needs finite mean and variance > 0");
                   }
                 },
                 [](const ShiftedExponential& e) {
                   if (!(e.rate > 0.0) || !std::isfinite(e.rate) || !std::isfinite(e.shift) ||
                       (e.direction != 1 && e.direction != -1)) {
                     throw Error(ErrorCode::kDomain,
                                 "shifted exponential needs rate > 0 and direction +-1");
                   }
                 },
                 [](const Uniform& u) {
                   if (!std::isfinite(u.lo) || !std::isfinite(u.hi) || !(u.lo < u.hi)) {
                     throw Error(ErrorCode::kDomain, "uniform needs lo < hi");
                   }
                 },
                 [](const Degenerate& p) {
                   if (!std::isfinite(p.value)) throw Error(ErrorCode::kDomain, "non-finite point mass");
                 },
             },
             d);
}

}  // namespace

OffspringLaw::OffspringLaw(CountLaw count, Displacement displacement)
    : count_(std::move(count)), displacement_(std::move(displacement)) {
  validate(count_);
  validate(displacement_);
}

FamilyTag OffspringLaw::family_tag() const noexcept {
  return static_cast<FamilyTag>(displacement_.index());
}

double OffspringLaw::mean_count() const noexcept {
  return std::visit(Overloaded{
                        [](const FixedCount& c) { return static_cast<double>(c.children); },
                        [](const ExplicitCount& c) {
                          double m = 0.0;
                          for (std::size_t i = 0; i < c.probabilities.size(); ++i) {
                            m += static_cast<double>(i) * c.probabilities[i];
                          }
                          return m;
                        },
                        [](const PoissonCount& c) { return c.mean; },
                    },
                    count_);
}

std::optional<int> OffspringLaw::max_count() const noexcept {
  return std::visit(Overloaded{
                        [](const FixedCount& c) -> std::optional<int> { return c.children; },
                        [](const ExplicitCount& c) -> std::optional<int> {
                          int last = static_cast<int>(c.probabilities.size()) - 1;
                          while (last > 0 && c.probabilities[last] == 0.0) --last;
                          return last;
                        },
                        [](const PoissonCount&) -> std::optional<int> { return std::nullopt; },
                    },
                    count_);
}

bool OffspringLaw::at_most_binary() const noexcept {
  const auto m = max_count();
  return m.has_value() && *m <= 2;
}

int OffspringLaw::sample_count(CounterRng& rng) const {
  return std::visit(Overloaded{
                        [](const FixedCount& c) { return c.children; },
                        [&rng](const ExplicitCount& c) {
                          const double u = rng.uniform();
                          double cdf = 0.0;
                          const int last = static_cast<int>(c.probabilities.size()) - 1;
                          for (int i = 0; i < last; ++i) {
                            cdf += c.probabilities[i];
                            if (u < cdf) return i;
                          }
                          return last;
                        },
                        [&rng](const PoissonCount& c) {
                          // Sequential inversion; mean is bounded by validate().
                          const double u = rng.uniform();
                          double term = std::exp(-c.mean);
                          double cdf = term;
                          int k = 0;
                          while (u > cdf && k < 100000) {
                            ++k;
                            term *= c.mean / k;
                            cdf += term;
                            if (term == 0.0 && cdf < u) break;
                          }
                          return k;
                        },
                    },
                    count_);
}

double OffspringLaw::sample_displacement(CounterRng& rng) const {
  return std::visit(Overloaded{
                        [&rng](const Gaussian& g) { return g.mean + std::sqrt(g.variance) * rng.normal(); },
                        [&rng](const ShiftedExponential& e) {
                          return e.shift + e.direction * rng.exponential() / e.rate;
                        },
                        [&rng](const Uniform& u) { return u.lo + (u.hi - u.lo) * rng.uniform(); },
                        [](const Degenerate& p) { return p.value; },
                    },
                    displacement_);
}

std::string OffspringLaw::describe() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(Overloaded{
                 [&os](const FixedCount& c) { os << "fixed(" << c.children << ")"; },
                 [&os](const ExplicitCount& c) {
                   os << "explicit(";
                   for (std::size_t i = 0; i < c.probabilities.size(); ++i) {
                     os << (i ? "," : "") << c.probabilities[i];
                   }
                   os << ")";
                 },
                 [&os](const PoissonCount& c) { os << "poisson(" << c.mean << ")"; },
             },
             count_);
  os << " x ";
  std::visit(Overloaded{
                 [&os](const Gaussian& g) { os << "gaussian(" << g.mean << "," << g.variance << ")"; },
                 [&os](const ShiftedExponential& e) {
                   os << "shifted_exponential(" << e.rate << "," << e.shift << "," << e.direction << ")";
                 },
                 [&os](const Uniform& u) { os << "uniform(" << u.lo << "," << u.hi << ")"; },
                 [&os](const Degenerate& p) { os << "degenerate(" << p.value << ")"; },
             },
             displacement_);
  return os.str();
}

double log_laplace(const Displacement& d, double x) {
  return std::visit(Overloaded{
                        [x](const Gaussian& g) { return -x * g.mean + 0.5 * x * x * g.variance; },
                        [x](const ShiftedExponential& e) {
                          const double denom = e.rate + e.direction * x;
                          if (!(denom > 0.0)) return kInf;
                          return -x * e.shift + std::log(e.rate) - std::log(denom);
                        },
                        [x](const Uniform& u) {
                          return -x * u.lo + log_uniform_laplace(x * (u.hi - u.lo));
                        },
                        [x](const Degenerate& p) { return -x * p.value; },
                    },
                    d);
}

std::pair<double, double> log_laplace_derivatives(const Displacement& d, double x) {
  if (!std::isfinite(log_laplace(d, x))) {
    throw Error(ErrorCode::kDivergence, "log-Laplace transform is infinite");
  }
  return std::visit(Overloaded{
                        [x](const Gaussian& g) {
                          return std::pair{-g.mean + x * g.variance, g.variance};
                        },
                        [x](const ShiftedExponential& e) {
                          const double denom = e.rate + e.direction * x;
                          return std::pair{-e.shift - e.direction / denom, 1.0 / (denom * denom)};
                        },
                        [x](const Uniform& u) {
                          const double w = u.hi - u.lo;
                          const auto [g1, g2] = log_uniform_laplace_derivatives(x * w);
                          return std::pair{-u.lo + w * g1, w * w * g2};
                        },
                        [](const Degenerate& p) { return std::pair{-p.value, 0.0}; },
                    },
                    d);
}

Displacement affine(const Displacement& d, double scale, double shift) {
  if (scale == 0.0 || !std::isfinite(scale) || !std::isfinite(shift)) {
    throw Error(ErrorCode::kDomain, "affine map needs a finite non-zero scale");
  }
  return std::visit(Overloaded{
                        [&](const Gaussian& g) -> Displacement {
                          return Gaussian{scale * g.mean + shift, scale * scale * g.variance};
                        },
                        [&](const ShiftedExponential& e) -> Displacement {
                          return ShiftedExponential{e.rate / std::fabs(scale), scale * e.shift + shift,
                                                    scale > 0 ? e.direction : -e.direction};
                        },
                        [&](const Uniform& u) -> Displacement {
                          const double a = scale * u.lo + shift;
                          const double b = scale * u.hi + shift;
                          return Uniform{std::min(a, b), std::max(a, b)};
                        },
                        [&](const Degenerate& p) -> Displacement {
                          return Degenerate{scale * p.value + shift};
                        },
                    },
                    d);
}

double psi(const OffspringLaw& law, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::kDomain, "psi needs t >= 0");
  const double mean = law.mean_count();
  if (mean <= 0.0) return -kInf;
  return std::log(mean) + log_laplace(law.displacement(), t);
}

std::pair<double, double> psi_derivatives(const OffspringLaw& law, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::kDomain, "psi needs t >= 0");
  if (!std::isfinite(log_laplace(law.displacement(), t))) {
    throw Error(ErrorCode::kDivergence, "psi is infinite at t");
  }
  return log_laplace_derivatives(law.displacement(), t);
}

double psi_by_quadrature(const OffspringLaw& law, double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::kDomain, "psi needs t >= 0");
  const double mean = law.mean_count();
  if (mean <= 0.0) return -kInf;
  const double transform = std::visit(
      Overloaded{
          [t](const Gaussian& g) {
            // Integrate over the standardized variable around the tilted mode.
            const double sd = std::sqrt(g.variance);
            const double mode = -t * sd;
            auto integrand = [&](double z) {
              return std::exp(-0.5 * z * z - t * (g.mean + sd * z)) / std::sqrt(2.0 * M_PI);
            };
            boost::math::quadrature::tanh_sinh<double> integrator;
            return integrator.integrate(integrand, mode - 40.0, mode + 40.0);
          },
          [t](const ShiftedExponential& e) {
            if (!(e.rate + e.direction * t > 0.0)) return kInf;
            auto integrand = [&](double x) {
              return e.rate * std::exp(-e.rate * x - t * (e.shift + e.direction * x));
            };
            boost::math::quadrature::exp_sinh<double> integrator;
            return integrator.integrate(integrand, 0.0, kInf);
          },
          [t](const Uniform& u) {
            auto integrand = [&](double v) { return std::exp(-t * v) / (u.hi - u.lo); };
            boost::math::quadrature::tanh_sinh<double> integrator;
            return integrator.integrate(integrand, u.lo, u.hi);
          },
          [t](const Degenerate& p) { return std::exp(-t * p.value); },
      },
      law.displacement());
  return std::log(mean) + std::log(transform);
}

namespace {

struct BoundaryResidual {
  double value;       // psi(1)
  double derivative;  // psi'(1)
  bool finite() const { return std::isfinite(value) && std::isfinite(derivative); }
  double norm() const { return std::max(std::fabs(value), std::fabs(derivative)); }
};

// psi(1), psi'(1) of the law with displacement s V + a, expressed through the
// original log-Laplace transform L: psi(1) = ln E[N] - a + L(s),
// psi'(1) = -a + s L'(s).
BoundaryResidual boundary_residual(const Displacement& d, double log_mean, double s, double a) {
  const double value = log_laplace(d, s);
  if (!std::isfinite(value)) return {kInf, kInf};
  const double first = log_laplace_derivatives(d, s).first;
  return {log_mean - a + value, -a + s * first};
}

}  // namespace

BoundaryNormalization normalize_to_boundary(const OffspringLaw& law) {
  const double log_mean = psi(law, 0.0);
  if (!(log_mean > 0.0)) {
    throw Error(ErrorCode::kSubcritical, "psi(0) = " + std::to_string(log_mean) + " <= 0");
  }
  const Displacement& d = law.displacement();
  if (law.family_tag() == FamilyTag::kDegenerate) {
    // s V + a is still a point mass; psi'(1) = -(s v + a) and psi(1) = ln E[N] - (s v + a)
    // cannot both vanish.
    throw Error(ErrorCode::kNoSolution, "point-mass displacement has no boundary normalization");
  }
  const bool analytic = law.family_tag() == FamilyTag::kGaussian;

  double s = 1.0;
  double a = 0.0;
  BoundaryResidual r = boundary_residual(d, log_mean, s, a);
  if (!r.finite()) {
    throw Error(ErrorCode::kNoSolution, "psi(1) is infinite for the starting law");
  }
  constexpr int kMaxIterations = 100;
  constexpr double kSolverTolerance = 1e-13;
  int iteration = 0;
  for (; iteration < kMaxIterations && r.norm() > kSolverTolerance; ++iteration) {
    // Jacobian of (psi(1), psi'(1)) with respect to (s, a).
    double j11, j12 = -1.0, j21, j22 = -1.0;
    if (analytic) {
      const auto [l1, l2] = log_laplace_derivatives(d, s);
      j11 = l1;
      j21 = l1 + s * l2;
    } else {
      const double h = 1e-6 * std::max(1.0, std::fabs(s));
      const auto up = boundary_residual(d, log_mean, s + h, a);
      const auto down = boundary_residual(d, log_mean, s - h, a);
      if (!up.finite() || !down.finite()) {
        throw Error(ErrorCode::kNoSolution, "finite-difference Jacobian left the domain of psi");
      }
      j11 = (up.value - down.value) / (2 * h);
      j21 = (up.derivative - down.derivative) / (2 * h);
    }
    const double det = j11 * j22 - j12 * j21;
    if (det == 0.0 || !std::isfinite(det)) break;
    const double ds = (-r.value * j22 + r.derivative * j12) / det;
    const double da = (-j11 * r.derivative + j21 * r.value) / det;

    // Backtracking keeps iterates where psi is finite and the residual shrinks.
    double step = 1.0;
    BoundaryResidual next{kInf, kInf};
    for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
      const double s_try = s + step * ds;
      if (s_try == 0.0) continue;
      next = boundary_residual(d, log_mean, s_try, a + step * da);
      if (next.finite() && next.norm() < r.norm()) break;
    }
    if (!next.finite() || next.norm() >= r.norm()) break;
    s += step * ds;
    a += step * da;
    r = next;
  }

  OffspringLaw normalized(law.count(), affine(d, s, a));
  const double p1 = psi(normalized, 1.0);
  const double dp1 = psi_derivatives(normalized, 1.0).first;
  const double residual = std::max(std::fabs(p1), std::fabs(dp1));
  if (!(residual <= kBoundaryTolerance)) {
    std::ostringstream os;
    os.precision(17);
    os << "Newton stopped after " << iteration << " iterations at s=" << s << " a=" << a
       << " with residual " << residual;
    throw Error(ErrorCode::kNoSolution, os.str());
  }
  return BoundaryNormalization{std::move(normalized), s, a, iteration, residual};
}

AssumptionReport check_assumptions(const OffspringLaw& law, double beta, double delta) {
  AssumptionReport report;
  report.psi0 = psi(law, 0.0);
  report.psi1 = psi(law, 1.0);
  if (std::isfinite(report.psi1)) {
    const auto [d1, d2] = psi_derivatives(law, 1.0);
    report.psi1_prime = d1;
    report.psi1_second = d2;
  } else {
    report.psi1_prime = std::numeric_limits<double>::quiet_NaN();
    report.psi1_second = std::numeric_limits<double>::quiet_NaN();
  }
  report.supercritical = report.psi0 > 0.0;

  // Every supported count law has moments of all orders, so
  // E[(W_{1,beta} + N)^delta] < inf  <=>  E[exp(-delta beta V)] < inf.
  report.delta_moment_ok =
      beta > 1.0 && delta > 1.0 && std::isfinite(log_laplace(law.displacement(), delta * beta));
  // E[W~ ln_+(W~)^3] < inf follows from a (1 + eps)-th moment of W~, i.e. from
  // finiteness of E[exp(-(1 + eps) V)].
  report.log_moment_ok = std::isfinite(report.psi1_second) &&
                         std::isfinite(log_laplace(law.displacement(), 1.0 + 1e-6));

  constexpr int kSamples = 100000;
  CounterRng rng(derive_key(domain_tag("check-assumptions"), 0));
  double acc = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const int children = law.sample_count(rng);
    double w = 0.0;
    for (int c = 0; c < children; ++c) {
      const double v = law.sample_displacement(rng);
      const double e = std::exp(-v);
      w += e + std::max(v, 0.0) * e;
    }
    if (w > 1.0) acc += w * std::pow(std::log(w), 3);
  }
  report.log_moment_estimate = acc / kSamples;
  report.log_moment_estimate_is_approximate = true;

  report.nonlattice_ok = !law.lattice();
  report.boundary_case = report.supercritical && std::fabs(report.psi1) <= kBoundaryTolerance &&
                         std::fabs(report.psi1_prime) <= kBoundaryTolerance;
  return report;
}

}  // namespace brwlimit
