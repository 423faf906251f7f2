#include "exp_kernel.hpp"

#include <cmath>

namespace brwlimit::detail {

void exp_neg_batch(const double* __restrict in, double scale, double* __restrict out,
                   std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = scale * in[i];
    const double e = std::exp(-(x < 700.0 ? x : 700.0));
    out[i] = x > 700.0 ? 0.0 : e;
  }
}

}  // namespace brwlimit::detail
