#include <benchmark/benchmark.h>

#include <numbers>
#include <vector>

#include "brwlimit/brw_sim.hpp"
#include "brwlimit/cascade.hpp"
#include "brwlimit/rng.hpp"
#include "brwlimit/stable.hpp"
#include "brwlimit/stats.hpp"

using namespace brwlimit;

namespace {

OffspringLaw boundary_gaussian() {
  return OffspringLaw(FixedCount{2}, Gaussian{2 * std::numbers::ln2, 2 * std::numbers::ln2});
}

void BM_Normal(benchmark::State& state) {
  CounterRng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(rng.normal());
}
BENCHMARK(BM_Normal);

void BM_Stable(benchmark::State& state) {
  CounterRng rng(2);
  const StableParams p{0.5};
  for (auto _ : state) benchmark::DoNotOptimize(sample_stable(p, rng));
}
BENCHMARK(BM_Stable);

// Time per replicate; items processed are generation-n particles.
void BM_Functionals(benchmark::State& state) {
  const OffspringLaw law = boundary_gaussian();
  const int n = static_cast<int>(state.range(0));
  const std::vector<double> betas{2.0};
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(functionals_from_stream(law, n, betas, brw_replicate_stream(1, i++)));
  }
  state.SetItemsProcessed(state.iterations() * (std::int64_t{1} << n));
}
BENCHMARK(BM_Functionals)->Arg(10)->Arg(14)->Arg(18)->Unit(benchmark::kMillisecond);

void BM_CascadeCylinders(benchmark::State& state) {
  const OffspringLaw law = boundary_gaussian();
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cascade_cylinder_masses(law, 14, 2.0, 8, CounterRng(i++)));
  }
}
BENCHMARK(BM_CascadeCylinders)->Unit(benchmark::kMillisecond);

void BM_KsPermutation(benchmark::State& state) {
  CounterRng rng(3);
  std::vector<double> a(static_cast<std::size_t>(state.range(0)));
  std::vector<double> b(a.size());
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = rng.normal();
  KsOptions opts;
  opts.permutations = 200;
  for (auto _ : state) benchmark::DoNotOptimize(ks_two_sample(a, b, opts));
}
BENCHMARK(BM_KsPermutation)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
