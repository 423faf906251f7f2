#include "brwlimit/cascade.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>

#include "brwlimit/errors.hpp"
#include "brwlimit/parallel.hpp"
#include "brwlimit/stable.hpp"
#include "brwlimit/summation.hpp"
#include "brwlimit/traversal.hpp"
#include "exp_kernel.hpp"

namespace brwlimit {
namespace {

void require_binary(const OffspringLaw& law) {
  if (!law.at_most_binary()) throw Error(ErrorCode::kNotBinary, "cascade needs at most two children per node");
}

void require_depths(int n, int p) {
  if (n < 0 || p < 0 || p > n) throw Error(ErrorCode::kDomain, "need 0 <= p <= n");
  if (p > 30) throw Error(ErrorCode::kDomain, "cylinder depth above 30 is not supported");
}

// Accumulates leaf contributions into the depth-p cylinder containing them.
// Contributions are exp(-beta V) (cascade) or V exp(-V) (derivative).
class CylinderVisitor {
 public:
  CylinderVisitor(int n, int p, double beta, bool derivative)
      : shift_(n - p), beta_(beta), derivative_(derivative), cells_(std::size_t{1} << p) {}

  void leaf(double v, std::uint64_t path) {
    positions_[buffered_] = v;
    cells_of_[buffered_] = path >> shift_;
    if (++buffered_ == kBatch) flush();
  }

  std::vector<double> values() {
    flush();
    std::vector<double> out(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) out[i] = cells_[i].value();
    return out;
  }

 private:
  static constexpr std::size_t kBatch = 256;

  void flush() {
    detail::exp_neg_batch(positions_.data(), beta_, weights_.data(), buffered_);
    for (std::size_t i = 0; i < buffered_; ++i) {
      const double c = derivative_ ? positions_[i] * weights_[i] : weights_[i];
      cells_[cells_of_[i]] += c;
    }
    buffered_ = 0;
  }

  int shift_;
  double beta_;
  bool derivative_;
  std::vector<CompensatedSum> cells_;
  std::array<double, kBatch> positions_{};
  std::array<std::uint64_t, kBatch> cells_of_{};
  std::array<double, kBatch> weights_{};
  std::size_t buffered_ = 0;
};

// Q(u) = exp(-V(u)) for every |u| = depth, scaled by `base`; absent nodes stay 0.
std::vector<double> q_weights(const OffspringLaw& law, int depth, double base, const CounterRng& stream) {
  struct Visitor {
    std::vector<double>* q;
    double base;
    void leaf(double v, std::uint64_t path) { (*q)[path] = base * std::exp(-v); }
  };
  std::vector<double> q(std::size_t{1} << depth, 0.0);
  Visitor visitor{&q, base};
  traverse(law, depth, stream, visitor);
  return q;
}

// Fills z, masses and the clamp count of `out` given its q vector.
void finish_limit_cells(LimitSample& out, double beta, const ZProxySource& z, const CounterRng& z_streams,
                        const CounterRng& s_streams, unsigned workers, const std::vector<bool>* skip) {
  const StableParams params{1.0 / beta};
  const std::size_t cells = out.q.size();
  out.z.assign(cells, 0.0);
  out.masses.values.assign(cells, 0.0);
  parallel_for(cells, workers, [&](std::size_t u) {
    if (out.q[u] == 0.0 || (skip != nullptr && (*skip)[u])) return;
    CounterRng zr = z_streams.split(u);
    out.z[u] = z.draw(zr);
    if (!(out.z[u] > 0.0)) return;
    CounterRng sr = s_streams.split(u);
    out.masses.values[u] = std::pow(out.q[u] * out.z[u], beta) * sample_stable(params, sr);
  });
  out.clamped = static_cast<std::size_t>(
      std::count_if(out.z.begin(), out.z.end(), [](double x) { return x < 0.0; }));
}

}  // namespace

const char* to_string(MeasureTag tag) {
  switch (tag) {
    case MeasureTag::kCascade: return "cascade";
    case MeasureTag::kDerivative: return "derivative";
    case MeasureTag::kLimit: return "limit";
  }
  return "unknown";
}

double CylinderMasses::total() const { return compensated_sum(values); }

double CylinderMasses::negative_fraction() const {
  if (values.empty()) return 0.0;
  const auto negative = std::count_if(values.begin(), values.end(), [](double x) { return x < 0.0; });
  return static_cast<double>(negative) / static_cast<double>(values.size());
}

CylinderMasses CylinderMasses::coarsen(int q) const {
  if (q < 0 || q > depth) throw Error(ErrorCode::kDomain, "coarsening depth out of range");
  CylinderMasses out;
  out.depth = q;
  out.tag = tag;
  const int shift = depth - q;
  std::vector<CompensatedSum> sums(std::size_t{1} << q);
  for (std::size_t i = 0; i < values.size(); ++i) sums[i >> shift] += values[i];
  out.values.resize(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) out.values[i] = sums[i].value();
  return out;
}

CylinderMasses cascade_cylinder_masses(const OffspringLaw& law, int n, double beta, int p,
                                       const CounterRng& stream) {
  require_binary(law);
  require_depths(n, p);
  CylinderVisitor visitor(n, p, beta, false);
  traverse(law, n, stream, visitor);
  return {p, visitor.values(), MeasureTag::kCascade};
}

CylinderMasses derivative_masses(const OffspringLaw& law, int n, int p, const CounterRng& stream) {
  require_binary(law);
  require_depths(n, p);
  CylinderVisitor visitor(n, p, 1.0, true);
  traverse(law, n, stream, visitor);
  return {p, visitor.values(), MeasureTag::kDerivative};
}

LimitSample limit_measure_sample(const OffspringLaw& law, double beta, int p, const ZProxySource& z,
                                 const CounterRng& stream, unsigned workers) {
  require_binary(law);
  require_depths(p, p);
  if (!(beta > 1.0)) throw Error(ErrorCode::kDomain, "limit measure needs beta > 1");
  LimitSample out;
  out.masses.depth = p;
  out.masses.tag = MeasureTag::kLimit;
  out.q = q_weights(law, p, 1.0, stream.split(0));
  finish_limit_cells(out, beta, z, stream.split(1), stream.split(2), workers, nullptr);
  return out;
}

LimitSample atom_refinement(const OffspringLaw& law, double beta, const LimitSample& parent, int target_p,
                            const ZProxySource& z, const CounterRng& stream, unsigned workers) {
  require_binary(law);
  if (!(beta > 1.0)) throw Error(ErrorCode::kDomain, "limit measure needs beta > 1");
  const int p = parent.masses.depth;
  if (target_p < p) throw Error(ErrorCode::kDomain, "refinement target below current depth");
  require_depths(target_p, target_p);
  if (target_p == p) return parent;
  const int d = target_p - p;
  const std::size_t block = std::size_t{1} << d;

  LimitSample out;
  out.masses.depth = target_p;
  out.masses.tag = MeasureTag::kLimit;
  out.q.assign(parent.q.size() * block, 0.0);
  std::vector<bool> skip(out.q.size(), false);
  const CounterRng tree_streams = stream.split(0);
  for (std::size_t u = 0; u < parent.q.size(); ++u) {
    if (parent.masses.values[u] == 0.0) {
      std::fill(skip.begin() + static_cast<std::ptrdiff_t>(u * block),
                skip.begin() + static_cast<std::ptrdiff_t>((u + 1) * block), true);
      continue;
    }
    const std::vector<double> sub = q_weights(law, d, parent.q[u], tree_streams.split(u));
    std::copy(sub.begin(), sub.end(), out.q.begin() + static_cast<std::ptrdiff_t>(u * block));
  }
  finish_limit_cells(out, beta, z, stream.split(1), stream.split(2), workers, &skip);
  return out;
}

GibbsWeights gibbs_normalize(const CylinderMasses& masses) {
  const double total = masses.total();
  if (!(total > 0.0)) throw Error(ErrorCode::kZeroTotal, "total mass must be > 0");
  GibbsWeights out;
  out.probabilities.resize(masses.values.size());
  CompensatedSum squares;
  for (std::size_t i = 0; i < masses.values.size(); ++i) {
    out.probabilities[i] = masses.values[i] / total;
    squares += out.probabilities[i] * out.probabilities[i];
  }
  out.participation_ratio = squares.value();
  out.ranked = out.probabilities;
  std::sort(out.ranked.begin(), out.ranked.end(), std::greater<>());
  return out;
}

void write_csv(std::ostream& out, const CylinderMasses& masses) {
  out << "depth,cell,mass\n";
  out.precision(17);
  for (std::size_t i = 0; i < masses.values.size(); ++i) {
    out << masses.depth << ',' << i << ',' << masses.values[i] << '\n';
  }
}

namespace {

constexpr char kMagic[4] = {'C', 'Y', 'L', 'M'};
constexpr std::uint32_t kBinaryVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "binary format assumes little-endian hosts");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw Error(ErrorCode::kIo, "truncated cylinder file");
  return value;
}

}  // namespace

void write_binary(std::ostream& out, const CylinderMasses& masses) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kBinaryVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(masses.depth));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(masses.tag));
  put<std::uint64_t>(out, masses.values.size());
  for (double v : masses.values) put<double>(out, v);
  if (!out) throw Error(ErrorCode::kIo, "failed to write cylinder file");
}

CylinderMasses read_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::kIo, "not a cylinder file");
  }
  if (get<std::uint32_t>(in) != kBinaryVersion) throw Error(ErrorCode::kIo, "unsupported cylinder file version");
  CylinderMasses m;
  m.depth = static_cast<int>(get<std::uint32_t>(in));
  const auto tag = get<std::uint32_t>(in);
  if (tag > 2) throw Error(ErrorCode::kIo, "unknown measure tag");
  m.tag = static_cast<MeasureTag>(tag);
  const auto count = get<std::uint64_t>(in);
  if (m.depth > 30 || count != (std::uint64_t{1} << m.depth)) throw Error(ErrorCode::kIo, "inconsistent cylinder count");
  m.values.resize(count);
  for (double& v : m.values) v = get<double>(in);
  return m;
}

}  // namespace brwlimit
