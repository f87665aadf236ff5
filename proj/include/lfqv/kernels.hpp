#pragma once

// Dense 3D correlation kernels over [N,T,H,W,C] activations and
// [kt,kh,kw,Cin,Cout] filters.
//
// Two implementations are kept side by side:
//   serial::   straightforward loops, the reference used by tests.
//   parallel:: register-blocked loops over a zero-padded copy, OpenMP over
//              disjoint output slices. Every output element is accumulated
//              by exactly one thread in a fixed order, so results do not
//              depend on the thread count. Summation order may differ from
//              serial:: (agreement ~1e-12).
// The autograd layer calls the parallel versions.

#include <array>
#include <cstdint>

#include "lfqv/tensor.hpp"

namespace lfqv::kernels {

using Stride3 = std::array<std::int64_t, 3>;
// (before, after) zero padding for the T, H and W axes.
using Padding3 = std::array<std::array<std::int64_t, 2>, 3>;

// Validates operands and returns the output shape (rank follows the input).
Shape conv3d_output_shape(const Shape& input, const Shape& kernel, const Stride3& stride,
                          const Padding3& pad);

namespace serial {

Tensor conv3d_forward(const Tensor& input, const Tensor& kernel, const Stride3& stride,
                      const Padding3& pad);
Tensor conv3d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             const Shape& input_shape, const Stride3& stride,
                             const Padding3& pad);
Tensor conv3d_backward_kernel(const Tensor& grad_out, const Tensor& input,
                              const Shape& kernel_shape, const Stride3& stride,
                              const Padding3& pad);

}  // namespace serial

namespace parallel {

Tensor conv3d_forward(const Tensor& input, const Tensor& kernel, const Stride3& stride,
                      const Padding3& pad);
Tensor conv3d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             const Shape& input_shape, const Stride3& stride,
                             const Padding3& pad);
Tensor conv3d_backward_kernel(const Tensor& grad_out, const Tensor& input,
                              const Shape& kernel_shape, const Stride3& stride,
                              const Padding3& pad);

}  // namespace parallel

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace lfqv::kernels
