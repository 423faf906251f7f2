#pragma once

// Dyadic cascade measures on [0, 1]. Node u of the binary tree owns the
// interval I_u and carries the weight Q(u) = exp(-V(u)). At depth p the
// 2^p cylinders are indexed by the binary word of u read most-significant
// first.
//
//   mu_{n,beta}(I_u) = sum_{|v|=n, v >= u} Q(v)^beta
//   mu~_n(I_u)       = sum_{|v|=n, v >= u} V(v) Q(v)          (signed)
//   limit(I_u)       = (Q(u) Z(u))^beta S_u
//
// with Z(u) independent proxies of the derivative-martingale limit and S_u
// i.i.d. stable(1/beta).
//
// Laws with at most two children are accepted; an only child takes a uniformly
// random slot, and missing children leave their cylinder empty.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "brwlimit/brw_sim.hpp"
#include "brwlimit/model.hpp"
#include "brwlimit/rng.hpp"

namespace brwlimit {

enum class MeasureTag : std::uint32_t { kCascade = 0, kDerivative = 1, kLimit = 2 };

const char* to_string(MeasureTag tag);

struct CylinderMasses {
  int depth = 0;
  std::vector<double> values;  // size 2^depth
  MeasureTag tag = MeasureTag::kCascade;

  double total() const;
  /// Fraction of cylinders with strictly negative mass.
  double negative_fraction() const;
  /// Masses at a coarser depth q <= depth, by summing children.
  CylinderMasses coarsen(int q) const;
};

/// Error(kNotBinary) for laws with more than two children, kDomain unless 0 <= p <= n.
CylinderMasses cascade_cylinder_masses(const OffspringLaw& law, int n, double beta, int p,
                                       const CounterRng& stream);

CylinderMasses derivative_masses(const OffspringLaw& law, int n, int p, const CounterRng& stream);

struct LimitSample {
  CylinderMasses masses;
  std::vector<double> q;  // Q(u) for |u| = depth; 0 for absent nodes
  std::vector<double> z;  // Z(u) proxies as drawn
  /// Proxies that were negative and clamped to zero.
  std::size_t clamped = 0;
};

/// Limit-measure cylinders at depth p. Stream layout: split(0) drives the
/// Q tree, split(1).split(u) the proxy of cell u, split(2).split(u) its stable
/// increment. Requires beta > 1.
LimitSample limit_measure_sample(const OffspringLaw& law, double beta, int p, const ZProxySource& z,
                                 const CounterRng& stream, unsigned workers = 1);

/// Refines a limit sample to target_p >= its depth: inside each cylinder the Q
/// tree is continued below the stored Q(u), and every child cylinder gets a
/// fresh proxy and a fresh stable increment. Child sums equal the parent mass in
/// law, not pathwise. Zero parent mass gives zero children.
LimitSample atom_refinement(const OffspringLaw& law, double beta, const LimitSample& parent, int target_p,
                            const ZProxySource& z, const CounterRng& stream, unsigned workers = 1);

struct GibbsWeights {
  std::vector<double> probabilities;
  std::vector<double> ranked;  // decreasing
  double participation_ratio = 0.0;
};

/// Error(kZeroTotal) unless the total mass is > 0.
GibbsWeights gibbs_normalize(const CylinderMasses& masses);

/// CSV rows "depth,cell,mass" after a header line.
void write_csv(std::ostream& out, const CylinderMasses& masses);

/// Little-endian binary: "CYLM", u32 version, u32 depth, u32 tag, u64 count, f64 values.
void write_binary(std::ostream& out, const CylinderMasses& masses);
/// Error(kIo) on a malformed stream.
CylinderMasses read_binary(std::istream& in);

}  // namespace brwlimit
