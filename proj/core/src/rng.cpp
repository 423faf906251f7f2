#include "brwlimit/rng.hpp"

#include <cmath>
#include <limits>

namespace brwlimit {
namespace detail {

double normal_slow_path(CounterRng& rng, int layer, double x) {
  constexpr double kTailStart = kZigguratX[1];
  if (layer == 0) {
    // Tail beyond R (Marsaglia 1964).
    for (;;) {
      const double a = -std::log(rng.uniform()) / kTailStart;
      const double b = -std::log(rng.uniform());
      if (2.0 * b > a * a) return kTailStart + a;
    }
  }
  const double y = kZigguratF[layer] + rng.uniform() * (kZigguratF[layer + 1] - kZigguratF[layer]);
  if (y < std::exp(-0.5 * x * x)) return x;
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
  // Lemire's nearly divisionless method.
  __extension__ using u128 = unsigned __int128;
  std::uint64_t x = (*this)();
  u128 m = static_cast<u128>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = (*this)();
      m = static_cast<u128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace brwlimit
