#pragma once

// Depth-first streaming traversal of one branching-random-walk realization.
//
// Node u draws its offspring count and its children's displacements from its
// own stream, keyed by derive_key(parent key, child ordinal) starting from the
// root stream. Only the pending children of the nodes on the current root-to-
// node path are stored, so memory is O(depth * width) while every particle of
// generation `depth` is reported to the visitor in a fixed (lexicographic)
// order.
//
// For laws with at most two children per node, each child also carries its
// dyadic slot (0 or 1) and a leaf's `path` is the binary word of slots read
// most-significant first, i.e. the index of its dyadic interval.

#include <cmath>
#include <cstdint>
#include <vector>

#include "brwlimit/errors.hpp"
#include "brwlimit/model.hpp"
#include "brwlimit/rng.hpp"

namespace brwlimit {

namespace detail {

struct FixedCountSampler {
  int children;
  int operator()(CounterRng&) const noexcept { return children; }
};
struct LawCountSampler {
  const OffspringLaw* law;
  int operator()(CounterRng& rng) const { return law->sample_count(rng); }
};
struct GaussianSampler {
  double mean;
  double sd;
  double operator()(CounterRng& rng) const noexcept { return mean + sd * rng.normal(); }
};
struct LawDisplacementSampler {
  const OffspringLaw* law;
  double operator()(CounterRng& rng) const { return law->sample_displacement(rng); }
};

/// Calls fn(count_sampler, displacement_sampler) with concrete sampler types
/// so the traversal inner loop avoids variant dispatch for common laws.
template <class Fn>
decltype(auto) with_samplers(const OffspringLaw& law, Fn&& fn) {
  const auto* fixed = std::get_if<FixedCount>(&law.count());
  const auto* gauss = std::get_if<Gaussian>(&law.displacement());
  if (fixed && gauss) {
    return fn(FixedCountSampler{fixed->children}, GaussianSampler{gauss->mean, std::sqrt(gauss->variance)});
  }
  if (fixed) return fn(FixedCountSampler{fixed->children}, LawDisplacementSampler{&law});
  if (gauss) return fn(LawCountSampler{&law}, GaussianSampler{gauss->mean, std::sqrt(gauss->variance)});
  return fn(LawCountSampler{&law}, LawDisplacementSampler{&law});
}

}  // namespace detail

struct TraversalLimits {
  /// Maximum number of stored pending children; 0 disables the guard.
  std::size_t particle_cap = 0;
};

/// Visits every particle of generation `depth`. Visitor must provide
/// `void leaf(double position, std::uint64_t path)`.
/// Error(kCapExceeded) if the pending-children store would exceed the cap.
template <class Visitor>
void traverse(const OffspringLaw& law, int depth, const CounterRng& root, Visitor& visitor,
              TraversalLimits limits = {}) {
  if (depth < 0) throw Error(ErrorCode::kDomain, "negative generation");
  if (depth == 0) {
    visitor.leaf(0.0, 0);
    return;
  }
  const bool binary = law.at_most_binary();
  detail::with_samplers(law, [&](auto count_of, auto displacement_of) {
    struct Level {
      std::vector<double> position;
      std::vector<std::uint64_t> path;
      std::uint64_t key = 0;
      std::size_t next = 0;
    };
    std::vector<Level> stack(static_cast<std::size_t>(depth));
    std::size_t stored = 0;

    // Draws the children of a node at generation `generation`; children of the
    // last internal generation go straight to the visitor.
    auto expand = [&](int generation, std::uint64_t key, double position, std::uint64_t path) {
      CounterRng rng(key);
      const int children = count_of(rng);
      if (generation == depth - 1) {
        if (binary && children == 1) {
          const double v = position + displacement_of(rng);
          visitor.leaf(v, 2 * path + (rng() & 1));
        } else {
          for (int i = 0; i < children; ++i) {
            const double v = position + displacement_of(rng);
            visitor.leaf(v, binary ? 2 * path + static_cast<std::uint64_t>(i) : 0);
          }
        }
        return false;
      }
      Level& level = stack[static_cast<std::size_t>(generation)];
      level.position.resize(static_cast<std::size_t>(children));
      level.path.resize(static_cast<std::size_t>(children));
      for (int i = 0; i < children; ++i) level.position[i] = position + displacement_of(rng);
      if (binary && children == 1) {
        level.path[0] = 2 * path + (rng() & 1);
      } else {
        for (int i = 0; i < children; ++i) {
          level.path[i] = binary ? 2 * path + static_cast<std::uint64_t>(i) : 0;
        }
      }
      level.key = key;
      level.next = 0;
      stored += level.position.size();
      if (limits.particle_cap != 0 && stored > limits.particle_cap) {
        throw Error(ErrorCode::kCapExceeded,
                    "pending particles exceed cap at generation " + std::to_string(generation + 1));
      }
      return children > 0;
    };

    if (!expand(0, root.key(), 0.0, 0)) return;
    int top = 0;
    while (top >= 0) {
      Level& level = stack[static_cast<std::size_t>(top)];
      if (level.next == level.position.size()) {
        stored -= level.position.size();
        level.position.clear();
        --top;
        continue;
      }
      const std::size_t i = level.next++;
      if (expand(top + 1, derive_key(level.key, i), level.position[i], level.path[i])) ++top;
    }
  });
}

}  // namespace brwlimit
