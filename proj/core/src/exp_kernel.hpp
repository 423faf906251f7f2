#pragma once

#include <cstddef>

namespace brwlimit::detail {

/// out[i] = exp(-scale * in[i]), flushed to 0 when scale * in[i] exceeds the
/// underflow exponent (700). Compiled separately with vectorization-friendly
/// flags; accurate to a few ulp of std::exp.
void exp_neg_batch(const double* in, double scale, double* out, std::size_t n) noexcept;

}  // namespace brwlimit::detail
