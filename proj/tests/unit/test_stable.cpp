#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "brwlimit/errors.hpp"
#include "brwlimit/stable.hpp"

using namespace brwlimit;

namespace {

struct Estimate {
  double mean;
  double standard_error;
};

template <class Draw>
Estimate laplace_estimate(Draw&& draw, double theta, int n) {
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = std::exp(-theta * draw());
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / n;
  const double var = std::max(sum2 / n - mean * mean, 1e-300);
  return {mean, std::sqrt(var / n)};
}

}  // namespace

TEST(StableParams, Validation) {
  EXPECT_THROW((StableParams{0.0}.validate()), Error);
  EXPECT_THROW((StableParams{1.0}.validate()), Error);
  EXPECT_THROW((StableParams{-0.2}.validate()), Error);
  EXPECT_NO_THROW((StableParams{0.999}.validate()));
  EXPECT_NEAR((StableParams{0.5}.levy_constant()), 0.5 / std::sqrt(std::numbers::pi), 1e-15);
  EXPECT_NEAR((StableParams{0.25}.levy_constant()), 0.25 / std::tgamma(0.75), 1e-15);
}

TEST(StableSampler, LaplaceTransform) {
  for (double alpha : {0.3, 0.5, 0.7, 0.9}) {
    const StableParams p{alpha};
    for (double theta : {0.5, 1.0, 2.0}) {
      CounterRng rng(static_cast<std::uint64_t>(alpha * 1000 + theta * 10));
      const Estimate e = laplace_estimate([&] { return sample_stable(p, rng); }, theta, 100000);
      EXPECT_NEAR(e.mean, std::exp(-std::pow(theta, alpha)), 5 * e.standard_error)
          << "alpha=" << alpha << " theta=" << theta;
    }
  }
}

TEST(StableSampler, HalfStableIsLevyDistribution) {
  // With E[exp(-theta S)] = exp(-sqrt(theta)), S has the law of 1 / (2 G^2) and
  // P(S <= x) = erfc(1 / (2 sqrt(x))).
  const StableParams p{0.5};
  CounterRng rng(21);
  const int n = 200000;
  std::vector<double> s(n);
  for (double& v : s) {
    v = sample_stable(p, rng);
    ASSERT_GT(v, 0.0);
    ASSERT_TRUE(std::isfinite(v));
  }
  std::sort(s.begin(), s.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = std::erfc(0.5 / std::sqrt(s[i]));
    d = std::max({d, std::fabs(f - static_cast<double>(i) / n), std::fabs(f - static_cast<double>(i + 1) / n)});
  }
  EXPECT_LT(d, 1.95 / std::sqrt(static_cast<double>(n)));
}

TEST(StableSampler, SmallAlphaStaysFinite) {
  const StableParams p{0.05};
  CounterRng rng(2);
  for (int i = 0; i < 100000; ++i) {
    const double v = sample_stable(p, rng);
    ASSERT_GT(v, 0.0);
    ASSERT_FALSE(std::isnan(v));
  }
}

TEST(Subordinator, ScalingAndEdgeCases) {
  const StableParams p{0.6};
  CounterRng rng(4);
  EXPECT_EQ(subordinator_at(p, 0.0, rng), 0.0);
  EXPECT_THROW(subordinator_at(p, -1.0, rng), Error);
  const double t = 3.0;
  for (double theta : {0.5, 1.5}) {
    const Estimate e = laplace_estimate([&] { return subordinator_at(p, t, rng); }, theta, 100000);
    EXPECT_NEAR(e.mean, std::exp(-t * std::pow(theta, 0.6)), 5 * e.standard_error);
  }
}

TEST(PoissonAtoms, CountCellsAndTruncation) {
  const StableParams p{0.5};
  const std::vector<BaseMass> base{{0, 1.0}, {1, 0.0}, {2, 3.0}, {3, 0.0}};
  const double z_min = 0.01;
  const double expected = p.levy_constant() * 4.0 * std::pow(z_min, -0.5) / 0.5;
  CounterRng rng(8);
  const int reps = 4000;
  double count = 0.0;
  double cell2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const PoissonAtoms a = poisson_atoms(p, base, z_min, rng);
    EXPECT_NEAR(a.small_jump_mean, p.levy_constant() * 4.0 * std::sqrt(z_min) / 0.5, 1e-14);
    count += static_cast<double>(a.atoms.size());
    for (const JumpAtom& atom : a.atoms) {
      ASSERT_GT(atom.z, z_min);
      ASSERT_TRUE(atom.cell == 0 || atom.cell == 2) << "atom in a zero-mass cell";
      cell2 += atom.cell == 2;
    }
  }
  EXPECT_NEAR(count / reps, expected, 5 * std::sqrt(expected / reps));
  EXPECT_NEAR(cell2 / count, 0.75, 5 * std::sqrt(0.75 * 0.25 / count));
}

TEST(PoissonAtoms, CompensatedSumHasStableLaplaceTransform) {
  // Atoms above z_min plus the mean of the rest approximate T(W).
  const StableParams p{0.5};
  const std::vector<BaseMass> base{{0, 0.4}, {1, 0.6}, {2, 1.0}};
  const double w = 2.0;
  CounterRng rng(12);
  auto draw = [&] {
    const PoissonAtoms a = poisson_atoms(p, base, default_truncation(p, w), rng);
    double s = a.small_jump_mean;
    for (const JumpAtom& atom : a.atoms) s += atom.z;
    return s;
  };
  for (double theta : {0.5, 2.0}) {
    const Estimate e = laplace_estimate(draw, theta, 20000);
    EXPECT_NEAR(e.mean, std::exp(-w * std::pow(theta, 0.5)), 5 * e.standard_error);
  }
}

TEST(PoissonAtoms, Errors) {
  const StableParams p{0.5};
  CounterRng rng(1);
  const std::vector<BaseMass> ok{{0, 1.0}};
  const std::vector<BaseMass> negative{{0, -1.0}};
  EXPECT_THROW(poisson_atoms(p, ok, 0.0, rng), Error);
  EXPECT_THROW(poisson_atoms(p, negative, 0.1, rng), Error);
  EXPECT_THROW(poisson_atoms(StableParams{1.2}, ok, 0.1, rng), Error);
  const std::vector<BaseMass> empty{{0, 0.0}};
  const PoissonAtoms a = poisson_atoms(p, empty, 0.1, rng);
  EXPECT_TRUE(a.atoms.empty());
  EXPECT_EQ(a.small_jump_mean, 0.0);
  EXPECT_NEAR(default_truncation(p, 4.0), 1.6e-5, 1e-18);
}

TEST(PdWeights, RankedNormalizedAndSmallTail) {
  const StableParams p{0.5};
  CounterRng rng(5);
  const PdWeights w = pd_weights(p, 20, rng);
  ASSERT_EQ(w.weights.size(), 20u);
  for (std::size_t i = 1; i < w.weights.size(); ++i) EXPECT_LT(w.weights[i], w.weights[i - 1]);
  double sum = 0.0;
  for (double x : w.weights) sum += x;
  EXPECT_NEAR(w.residual, 1.0 - sum, 1e-15);
  EXPECT_GT(w.residual, 0.0);
  EXPECT_EQ(w.arrivals, 10000u);
  EXPECT_LT(w.tail_fraction, 1e-3);
  EXPECT_THROW(pd_weights(p, 0, rng), Error);
  EXPECT_EQ(pd_weights(p, 5000, rng).arrivals, 50000u);
}

TEST(PdWeights, SecondMomentMatchesPoissonDirichlet) {
  // For PD(alpha, 0), E[sum_i w_i^2] = 1 - alpha. The 1e-3 slack covers the
  // squares beyond the 200 retained weights.
  for (double alpha : {0.3, 0.5, 0.7}) {
    const StableParams p{alpha};
    CounterRng rng(static_cast<std::uint64_t>(alpha * 100));
    const int reps = 4000;
    double sum = 0.0;
    double sum2 = 0.0;
    for (int r = 0; r < reps; ++r) {
      const PdWeights w = pd_weights(p, 200, rng);
      double s = 0.0;
      for (double x : w.weights) s += x * x;
      sum += s;
      sum2 += s * s;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    EXPECT_NEAR(mean, 1.0 - alpha, 5 * se + 1e-3) << "alpha=" << alpha;
  }
}

TEST(PdWeights, LargestShareMatchesDirectJumpNormalization) {
  // Independent route: jumps of T on [0, 1] from the Poisson sampler, normalized by their sum.
  const StableParams p{0.5};
  CounterRng rng_pd(31);
  CounterRng rng_atoms(32);
  const std::vector<BaseMass> base{{0, 1.0}};
  const int reps = 4000;
  double pd_mean = 0.0;
  double direct_mean = 0.0;
  double direct_sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    pd_mean += pd_weights(p, 1, rng_pd).weights[0];
    const PoissonAtoms a = poisson_atoms(p, base, 1e-6, rng_atoms);
    double total = a.small_jump_mean;
    double largest = 0.0;
    for (const JumpAtom& atom : a.atoms) {
      total += atom.z;
      largest = std::max(largest, atom.z);
    }
    direct_mean += largest / total;
    direct_sq += (largest / total) * (largest / total);
  }
  pd_mean /= reps;
  direct_mean /= reps;
  const double se = std::sqrt((direct_sq / reps - direct_mean * direct_mean) / reps);
  EXPECT_NEAR(pd_mean, direct_mean, 5 * std::sqrt(2.0) * se);
}
