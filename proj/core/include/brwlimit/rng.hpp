#pragma once

// Counter-based random streams.
//
// A stream is identified by a 64-bit key; its j-th output is
// mix64(key + (j + 1) * gamma), the SplitMix64 output function applied to a
// keyed counter. Output therefore depends only on the key and the number of
// draws taken, never on which thread runs the stream or when. Substreams are
// addressed by index: `split(i)` hashes (key, i) into a fresh key. Simulations
// key each tree node by its path from the root, so any subtree can be
// regenerated independently of traversal order.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

#include "brwlimit/ziggurat_tables.hpp"

namespace brwlimit {

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

/// Key of substream `index` of the stream keyed by `key`.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t index) noexcept {
  return mix64((key ^ 0x8cb92ba72f3d8dd7ULL) + (index + 1) * 0xd1b54a32d192ed03ULL);
}

/// Stable 64-bit tag for a role name, used to separate independent uses of
/// one master seed (e.g. "z-pool" vs "stable").
constexpr std::uint64_t domain_tag(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGoldenGamma); }

  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard exponential variate.
  double exponential() noexcept { return -std::log(uniform()); }

  /// Standard normal variate (256-layer ziggurat).
  double normal() noexcept;

  /// Uniform integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n) noexcept;

  CounterRng split(std::uint64_t index) const noexcept { return CounterRng(derive_key(key_, index)); }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

namespace detail {

/// Returns the accepted magnitude, or NaN to request a fresh draw.
double normal_slow_path(CounterRng& rng, int layer, double x);

}  // namespace detail

inline double CounterRng::normal() noexcept {
  for (;;) {
    const std::uint64_t bits = (*this)();
    const int layer = static_cast<int>(bits & 0xff);
    // Branch-free sign: bit 8 moved into the IEEE sign position.
    const std::uint64_t sign = (bits & 0x100) << 55;
    const double x = static_cast<double>(bits >> 11) * 0x1.0p-53 * detail::kZigguratX[layer];
    if (x < detail::kZigguratX[layer + 1]) return std::bit_cast<double>(std::bit_cast<std::uint64_t>(x) | sign);
    const double y = detail::normal_slow_path(*this, layer, x);
    if (!std::isnan(y)) return std::bit_cast<double>(std::bit_cast<std::uint64_t>(y) | sign);
  }
}

/// Root stream of replicate `index` for a given role and master seed.
inline CounterRng replicate_stream(std::uint64_t master_seed, std::string_view role,
                                   std::uint64_t index) noexcept {
  return CounterRng(derive_key(derive_key(master_seed, domain_tag(role)), index));
}

}  // namespace brwlimit
