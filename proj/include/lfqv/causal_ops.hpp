#pragma once

// Temporally causal building blocks over [T,H,W,C] / [N,T,H,W,C] tensors.
// Output frame t of every op here depends only on input frames <= t.

#include <cstdint>
#include <vector>

#include "lfqv/autograd.hpp"
#include "lfqv/kernels.hpp"
#include "lfqv/tensor.hpp"

namespace lfqv::causal {

using kernels::Padding3;
using kernels::Stride3;

// Temporal (kt - 1, 0); spatial (floor((k-1)/2), floor(k/2)).
Padding3 causal_padding(const Shape& kernel_shape);
// Centered padding on all three axes, for comparison with the causal form.
Padding3 regular_padding(const Shape& kernel_shape);

struct CausalConv3dLayer {
  Shape kernel_shape;            // [kt, kh, kw, Cin, Cout]
  Stride3 stride{1, 1, 1};

  Padding3 padding() const { return causal_padding(kernel_shape); }
};

// Frame bookkeeping for temporal resampling by stride s:
// output = 1 + (input - 1) / s when downsampling.
struct FrameMap {
  std::int64_t stride = 1;
  std::int64_t input_frames = 1;
  std::int64_t output_frames = 1;

  // Throws ShapeError unless (frames - 1) % stride == 0.
  static FrameMap downsample(std::int64_t frames, std::int64_t stride);
  static FrameMap upsample(std::int64_t frames, std::int64_t stride);
};

Var causal_conv3d(const Var& input, const Var& kernel, const Stride3& stride = {1, 1, 1});
Tensor causal_conv3d(const Tensor& input, const Tensor& kernel, const Stride3& stride = {1, 1, 1});

// Causal convolution with temporal stride s (and optional spatial stride).
// Output frame t is aligned with input frame s * t.
Var temporal_downsample(const Var& input, const Var& kernel, std::int64_t s,
                        std::int64_t spatial_stride = 1);

// Repeats each frame s times, then drops the first s - 1 frames:
// T' frames -> 1 + s (T' - 1).
Var temporal_upsample(const Var& input, std::int64_t s);
Tensor temporal_upsample(const Tensor& input, std::int64_t s);

// [.., H, W, C*r*r] -> [.., H*r, W*r, C]. Channel block (i*r + j)*C + c lands
// at spatial offset (i, j) within each r x r output block.
Var depth_to_space(const Var& input, std::int64_t r);
Tensor depth_to_space(const Tensor& input, std::int64_t r);
Tensor space_to_depth(const Tensor& input, std::int64_t r);

// Depthwise separable [1,2,1]/4 blur on each axis followed by striding.
// Borders replicate the edge value so constants are preserved. With
// causal_temporal the time taps are (t-2, t-1, t); otherwise (t-1, t, t+1).
Tensor blur_pool3d(const Tensor& input, const Stride3& stride, bool causal_temporal);

// Per-frame group normalization: statistics over (H, W, channels of the
// group) for every (n, t). No affine parameters.
Var group_norm(const Var& x, std::int64_t groups, double eps = 1e-5);
Tensor group_norm(const Tensor& x, std::int64_t groups, double eps = 1e-5);

// Nearest resize of a control signal onto target frames/height/width.
// Time follows the upsampling frame map: target frame j reads control frame
// ceil(j / s) with s = (T - 1) / (Tc - 1), so the mapping stays causal.
Var resize_control(const Var& control, std::int64_t frames, std::int64_t height,
                   std::int64_t width);

struct AdaptiveNormParams {
  Var w_gamma;  // [Cz, C]
  Var b_gamma;  // [C]
  Var w_beta;   // [Cz, C]
  Var b_beta;   // [C]
};

// group_norm(x) * (1 + gamma(control)) + beta(control), where gamma/beta are
// linear projections of the control resized to x's resolution.
Var adaptive_group_norm(const Var& x, const Var& control, std::int64_t groups,
                        const AdaptiveNormParams& params, double eps = 1e-5);

// Default group count: 8, capped at (and dividing) the channel count.
std::int64_t default_groups(std::int64_t channels);

}  // namespace lfqv::causal
