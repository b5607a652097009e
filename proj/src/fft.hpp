#pragma once

#include "nompcfar/tensor.hpp"

#include <span>

namespace nompcfar::detail {

/// Unnormalized forward transform sum_n x_n e^{-j 2 pi k n / M} over each
/// dimension. `in` (extents `in_dims`) is zero-padded into `out`
/// (extents `out_dims`, each >= the matching input extent) before the
/// transform. Safe to call concurrently.
void fft_forward_padded(std::span<const Complex> in, const Dims& in_dims, const Dims& out_dims,
                        std::span<Complex> out);

inline void fft_forward(std::span<const Complex> in, const Dims& dims, std::span<Complex> out) {
    fft_forward_padded(in, dims, dims, out);
}

} // namespace nompcfar::detail
