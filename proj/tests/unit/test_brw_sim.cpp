#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "brwlimit/brw_sim.hpp"
#include "brwlimit/errors.hpp"
#include "brwlimit/model.hpp"

using namespace brwlimit;

namespace {

const double kLn2 = std::numbers::ln2;

OffspringLaw boundary_gaussian() { return OffspringLaw(FixedCount{2}, Gaussian{2 * kLn2, 2 * kLn2}); }

// Generation-by-generation reference that stores the whole population. Each
// node's children come from the stream of the node's own key; child i of a
// node with key k has key derive_key(k, i).
struct Particle {
  double position;
  std::uint64_t key;
};

std::vector<double> breadth_first_positions(const OffspringLaw& law, int n, std::uint64_t root_key) {
  std::vector<Particle> generation{{0.0, root_key}};
  for (int g = 0; g < n; ++g) {
    std::vector<Particle> next;
    for (const Particle& p : generation) {
      CounterRng rng(p.key);
      const int children = law.sample_count(rng);
      for (int i = 0; i < children; ++i) {
        next.push_back({p.position + law.sample_displacement(rng), derive_key(p.key, static_cast<std::uint64_t>(i))});
      }
    }
    generation = std::move(next);
  }
  std::vector<double> out;
  for (const Particle& p : generation) out.push_back(p.position);
  return out;
}

struct MeanEstimate {
  double mean;
  double standard_error;
};

MeanEstimate mean_of(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1) / n)};
}

}  // namespace

TEST(Functionals, MatchBreadthFirstReference) {
  const std::vector<OffspringLaw> laws = {
      boundary_gaussian(),
      OffspringLaw(ExplicitCount{{0.2, 0.3, 0.5}}, Uniform{-0.5, 1.5}),
      OffspringLaw(PoissonCount{2.5}, ShiftedExponential{2.0, -0.3, 1}),
  };
  const std::vector<double> betas{1.0, 1.7, 2.0};
  for (const OffspringLaw& law : laws) {
    for (std::uint64_t index = 0; index < 20; ++index) {
      const CounterRng root = brw_replicate_stream(99, index);
      const int n = 7;
      const GenerationFunctionals f = functionals_from_stream(law, n, betas, root);
      const std::vector<double> v = breadth_first_positions(law, n, root.key());
      ASSERT_EQ(f.particle_count, v.size());
      EXPECT_EQ(f.extinct, v.empty());
      double w = 0.0;
      double z = 0.0;
      for (double x : v) {
        w += std::exp(-x);
        z += x * std::exp(-x);
      }
      const double scale = std::max(1.0, w);
      EXPECT_NEAR(f.W, w, 1e-12 * scale);
      EXPECT_NEAR(f.Z, z, 1e-11 * std::max(1.0, std::fabs(z)));
      for (double beta : betas) {
        double wb = 0.0;
        for (double x : v) wb += std::exp(-beta * x);
        EXPECT_NEAR(f.w_beta(beta), wb, 1e-12 * std::max(1.0, wb));
      }
      if (!v.empty()) {
        EXPECT_DOUBLE_EQ(f.min_V, *std::min_element(v.begin(), v.end()));
      }
    }
  }
}

TEST(Functionals, DegenerateBoundaryLawIsExact) {
  // V == ln 2 with two children: W_n = 1, Z_n = n ln 2, W_{n,2} = 2^{-n}.
  const OffspringLaw law(FixedCount{2}, Degenerate{kLn2});
  const std::vector<double> betas{2.0};
  const GenerationFunctionals f = functionals_from_stream(law, 12, betas, CounterRng(1));
  EXPECT_NEAR(f.W, 1.0, 1e-12);
  EXPECT_NEAR(f.Z, 12 * kLn2, 1e-11);
  EXPECT_NEAR(f.w_beta(2.0), std::ldexp(1.0, -12), 1e-15);
  EXPECT_NEAR(f.min_V, 12 * kLn2, 1e-12);
  EXPECT_EQ(f.particle_count, 4096u);
  EXPECT_NEAR(recentered_min(f), 12 * kLn2 - 1.5 * std::log(12.0), 1e-12);
  EXPECT_NEAR(rescaled_wbeta(f, 2.0), std::pow(12.0, 3.0) * std::ldexp(1.0, -12), 1e-12);
}

TEST(Functionals, GenerationZeroIsTheRoot) {
  const std::vector<double> betas{2.0};
  const GenerationFunctionals f = functionals_from_stream(boundary_gaussian(), 0, betas, CounterRng(3));
  EXPECT_EQ(f.particle_count, 1u);
  EXPECT_DOUBLE_EQ(f.W, 1.0);
  EXPECT_DOUBLE_EQ(f.Z, 0.0);
  EXPECT_THROW(rescaled_wbeta(f, 2.0), Error);
}

TEST(Functionals, MeansMatchTheLaplaceTransform) {
  // E[W_{n,beta}] = exp(n psi(beta)) and E[Z_n] = -n psi'(1) exp(n psi(1)).
  const OffspringLaw law(ExplicitCount{{0.1, 0.2, 0.7}}, Gaussian{0.4, 0.5});
  const int n = 3;
  const std::vector<double> betas{1.0, 1.5};
  const SimConfig cfg{n, betas, 40000, 2024};
  std::vector<double> w;
  std::vector<double> w15;
  std::vector<double> z;
  std::vector<double> counts;
  for (std::uint64_t i = 0; i < cfg.replicates; ++i) {
    const GenerationFunctionals f = simulate_functionals(law, cfg, i);
    w.push_back(f.W);
    w15.push_back(f.w_beta(1.5));
    z.push_back(f.Z);
    counts.push_back(static_cast<double>(f.particle_count));
  }
  const auto check = [](const std::vector<double>& x, double expected) {
    const MeanEstimate e = mean_of(x);
    EXPECT_NEAR(e.mean, expected, 5 * e.standard_error) << "expected " << expected;
  };
  check(w, std::exp(n * psi(law, 1.0)));
  check(w15, std::exp(n * psi(law, 1.5)));
  check(z, -n * psi_derivatives(law, 1.0).first * std::exp(n * psi(law, 1.0)));
  check(counts, std::pow(law.mean_count(), n));
}

TEST(Functionals, BoundaryMartingalesHaveUnitAndZeroMean) {
  const int n = 4;
  const SimConfig cfg{n, {1.0}, 40000, 5};
  std::vector<double> w;
  std::vector<double> z;
  for (std::uint64_t i = 0; i < cfg.replicates; ++i) {
    const GenerationFunctionals f = simulate_functionals(boundary_gaussian(), cfg, i);
    w.push_back(f.W);
    z.push_back(f.Z);
  }
  const MeanEstimate ew = mean_of(w);
  const MeanEstimate ez = mean_of(z);
  EXPECT_NEAR(ew.mean, 1.0, 5 * ew.standard_error);
  EXPECT_NEAR(ez.mean, 0.0, 5 * ez.standard_error);
}

TEST(Simulation, ReplicatesDependOnlyOnSeedAndIndex) {
  SimConfig a{8, {1.0, 2.0}, 100, 77};
  SimConfig b = a;
  b.replicates = 5000;
  b.betas = {2.0, 1.0};
  const GenerationFunctionals x = simulate_functionals(boundary_gaussian(), a, 42);
  const GenerationFunctionals y = simulate_functionals(boundary_gaussian(), b, 42);
  EXPECT_EQ(x.W, y.W);
  EXPECT_EQ(x.Z, y.Z);
  EXPECT_EQ(x.w_beta(2.0), y.w_beta(2.0));
  EXPECT_EQ(x.min_V, y.min_V);
  const GenerationFunctionals other = simulate_functionals(boundary_gaussian(), a, 43);
  EXPECT_NE(x.W, other.W);
}

TEST(Simulation, ValidatesArguments) {
  const OffspringLaw law = boundary_gaussian();
  EXPECT_THROW(simulate_functionals(law, SimConfig{-1, {1.0}, 1, 0}, 0), Error);
  EXPECT_THROW(simulate_functionals(law, SimConfig{3, {}, 1, 0}, 0), Error);
  EXPECT_THROW(simulate_functionals(law, SimConfig{3, {0.5}, 1, 0}, 0), Error);
  EXPECT_THROW(simulate_functionals(law, SimConfig{3, {1.0}, 2, 0}, 2), Error);
  const GenerationFunctionals f = simulate_functionals(law, SimConfig{3, {1.0}, 1, 0}, 0);
  try {
    (void)f.w_beta(2.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingBeta);
  }
}

TEST(Simulation, ParticleCapAborts) {
  SimConfig cfg{20, {1.0}, 1, 0};
  cfg.particle_cap = 10;
  try {
    simulate_functionals(boundary_gaussian(), cfg, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCapExceeded);
  }
  cfg.particle_cap = 1000;
  EXPECT_NO_THROW(simulate_functionals(boundary_gaussian(), cfg, 0));
}

TEST(Simulation, ExtinctionAndConditioning) {
  const OffspringLaw law(ExplicitCount{{0.5, 0.0, 0.5}}, Gaussian{});
  SimConfig cfg{6, {1.0}, 400, 11};
  int extinct = 0;
  for (std::uint64_t i = 0; i < cfg.replicates; ++i) {
    const GenerationFunctionals f = simulate_functionals(law, cfg, i);
    if (f.extinct) {
      ++extinct;
      EXPECT_EQ(f.W, 0.0);
      EXPECT_EQ(f.Z, 0.0);
      EXPECT_TRUE(std::isinf(f.min_V));
      EXPECT_THROW(recentered_min(f), Error);
    }
  }
  EXPECT_GT(extinct, 0);
  cfg.condition_on_survival = true;
  int redrawn = 0;
  for (std::uint64_t i = 0; i < cfg.replicates; ++i) {
    const GenerationFunctionals f = simulate_functionals(law, cfg, i);
    EXPECT_FALSE(f.extinct);
    redrawn += f.attempts > 1;
  }
  EXPECT_EQ(redrawn, extinct);
}

TEST(Simulation, UnderflowFlushesToZero) {
  const OffspringLaw law(FixedCount{2}, Degenerate{400.0});
  const std::vector<double> betas{2.0};
  const GenerationFunctionals f = functionals_from_stream(law, 2, betas, CounterRng(0));
  EXPECT_EQ(f.w_beta(2.0), 0.0);
  EXPECT_EQ(f.W, 0.0);
  EXPECT_FALSE(std::isnan(f.Z));
}

TEST(DerivativeProxy, DeterministicInSeed) {
  const OffspringLaw law = boundary_gaussian();
  EXPECT_EQ(derivative_limit_sample(law, 10, 5), derivative_limit_sample(law, 10, 5));
  EXPECT_NE(derivative_limit_sample(law, 10, 5), derivative_limit_sample(law, 10, 6));
  const std::vector<double> pool = make_z_pool(law, 8, 64, 3, 1);
  EXPECT_EQ(pool, make_z_pool(law, 8, 64, 3, 4));
}

TEST(StarRhs, DegenerateLawAndConstantPool) {
  // Two children at V == ln 2 and every X == 3: the sum is 2 * 2^{-beta} * 3.
  const OffspringLaw law(FixedCount{2}, Degenerate{kLn2});
  const std::vector<double> pool{3.0, 3.0};
  CounterRng rng(1);
  EXPECT_NEAR(star_equation_rhs(law, 2.0, pool, rng), 1.5, 1e-14);
  EXPECT_THROW(star_equation_rhs(law, 2.0, std::vector<double>{}, rng), Error);
}

TEST(ZProxySource, PooledDrawsComeFromThePool) {
  const ZProxySource source = ZProxySource::pooled({1.0, 2.0, 3.0});
  EXPECT_TRUE(source.is_pooled());
  CounterRng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double x = source.draw(rng);
    EXPECT_TRUE(x == 1.0 || x == 2.0 || x == 3.0);
  }
  EXPECT_THROW(ZProxySource::pooled({}), Error);
  const ZProxySource simulated = ZProxySource::simulated(boundary_gaussian(), 6);
  EXPECT_FALSE(simulated.is_pooled());
  CounterRng a(8);
  CounterRng b(8);
  EXPECT_EQ(simulated.draw(a), simulated.draw(b));
}
