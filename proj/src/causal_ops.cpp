#include "lfqv/causal_ops.hpp"

#include <cmath>
#include <string>

#include "lfqv/errors.hpp"

namespace lfqv::causal {

namespace {

struct IndexMap {
  Shape shape;
  std::vector<std::int64_t> src;
};

Tensor apply(const Tensor& x, const IndexMap& m) {
  Tensor out(m.shape);
  for (std::size_t i = 0; i < m.src.size(); ++i) out[static_cast<std::int64_t>(i)] = x[m.src[i]];
  return out;
}

IndexMap temporal_upsample_map(const Shape& in, std::int64_t s) {
  if (s < 1) throw ShapeError("temporal_upsample: stride must be >= 1");
  const auto v = video_dims(in, "temporal_upsample");
  const FrameMap fm = FrameMap::upsample(v.t, s);
  IndexMap m{with_video_dims(in, fm.output_frames, v.h, v.w, v.c), {}};
  m.src.reserve(static_cast<std::size_t>(shape_numel(m.shape)));
  const std::int64_t fs = v.frame_size();
  for (std::int64_t n = 0; n < v.n; ++n)
    for (std::int64_t j = 0; j < fm.output_frames; ++j) {
      const std::int64_t src_t = (j + s - 1) / s;  // ceil(j / s)
      const std::int64_t base = (n * v.t + src_t) * fs;
      for (std::int64_t k = 0; k < fs; ++k) m.src.push_back(base + k);
    }
  return m;
}

IndexMap depth_to_space_map(const Shape& in, std::int64_t r) {
  const auto v = video_dims(in, "depth_to_space");
  if (r < 1 || v.c % (r * r) != 0) {
    throw ShapeError("depth_to_space: channels " + std::to_string(v.c) +
                     " not divisible by r^2 = " + std::to_string(r * r));
  }
  const std::int64_t c = v.c / (r * r);
  IndexMap m{with_video_dims(in, v.t, v.h * r, v.w * r, c), {}};
  m.src.resize(static_cast<std::size_t>(shape_numel(m.shape)));
  const std::int64_t ho = v.h * r, wo = v.w * r;
  std::size_t o = 0;
  for (std::int64_t nt = 0; nt < v.n * v.t; ++nt)
    for (std::int64_t y = 0; y < ho; ++y)
      for (std::int64_t x = 0; x < wo; ++x)
        for (std::int64_t k = 0; k < c; ++k) {
          const std::int64_t i = y % r, j = x % r;
          const std::int64_t src_c = (i * r + j) * c + k;
          m.src[o++] = ((nt * v.h + y / r) * v.w + x / r) * v.c + src_c;
        }
  return m;
}

IndexMap space_to_depth_map(const Shape& in, std::int64_t r) {
  const auto v = video_dims(in, "space_to_depth");
  if (r < 1 || v.h % r != 0 || v.w % r != 0) {
    throw ShapeError("space_to_depth: spatial extents not divisible by r = " + std::to_string(r));
  }
  const std::int64_t hs = v.h / r, ws = v.w / r, cs = v.c * r * r;
  IndexMap m{with_video_dims(in, v.t, hs, ws, cs), {}};
  m.src.resize(static_cast<std::size_t>(shape_numel(m.shape)));
  std::size_t o = 0;
  for (std::int64_t nt = 0; nt < v.n * v.t; ++nt)
    for (std::int64_t y = 0; y < hs; ++y)
      for (std::int64_t x = 0; x < ws; ++x)
        for (std::int64_t cc = 0; cc < cs; ++cc) {
          const std::int64_t blk = cc / v.c, k = cc % v.c;
          const std::int64_t i = blk / r, j = blk % r;
          m.src[o++] = ((nt * v.h + y * r + i) * v.w + x * r + j) * v.c + k;
        }
  return m;
}

struct NormStats {
  std::vector<double> mean, inv_std;
};

// Normalized values plus per-(n, t, group) statistics.
Tensor group_norm_forward(const Tensor& x, std::int64_t groups, double eps, NormStats* stats) {
  const auto v = video_dims(x.shape(), "group_norm");
  if (groups < 1 || v.c % groups != 0) {
    throw ShapeError("group_norm: channels " + std::to_string(v.c) + " not divisible by " +
                     std::to_string(groups) + " groups");
  }
  const std::int64_t cg = v.c / groups;
  const std::int64_t pix = v.h * v.w;
  const double m = static_cast<double>(pix * cg);
  Tensor y(x.shape());
  if (stats) {
    stats->mean.assign(static_cast<std::size_t>(v.n * v.t * groups), 0.0);
    stats->inv_std.assign(stats->mean.size(), 0.0);
  }
  for (std::int64_t f = 0; f < v.n * v.t; ++f) {
    const double* xf = x.data().data() + f * v.frame_size();
    double* yf = y.data().data() + f * v.frame_size();
    for (std::int64_t g = 0; g < groups; ++g) {
      double sum = 0.0;
      for (std::int64_t p = 0; p < pix; ++p)
        for (std::int64_t k = 0; k < cg; ++k) sum += xf[p * v.c + g * cg + k];
      const double mean = sum / m;
      double var = 0.0;
      for (std::int64_t p = 0; p < pix; ++p)
        for (std::int64_t k = 0; k < cg; ++k) {
          const double d = xf[p * v.c + g * cg + k] - mean;
          var += d * d;
        }
      var /= m;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (std::int64_t p = 0; p < pix; ++p)
        for (std::int64_t k = 0; k < cg; ++k) {
          const std::int64_t i = p * v.c + g * cg + k;
          yf[i] = (xf[i] - mean) * inv;
        }
      if (stats) {
        stats->mean[static_cast<std::size_t>(f * groups + g)] = mean;
        stats->inv_std[static_cast<std::size_t>(f * groups + g)] = inv;
      }
    }
  }
  return y;
}

void check_linear(const Var& w, const Var& b, std::int64_t cz, std::int64_t c, const char* what) {
  const auto& ws = w.shape();
  if (ws.size() != 2 || ws[0] != cz || ws[1] != c || b.shape() != Shape{c}) {
    throw DimensionError(std::string("adaptive_group_norm: ") + what + " projection must be [" +
                         std::to_string(cz) + "," + std::to_string(c) + "] + [" +
                         std::to_string(c) + "]");
  }
}

// Per-position linear map over the last axis, as a 1x1x1 convolution.
Var project(const Var& x, const Var& w, const Var& b) {
  const auto& ws = w.shape();
  Var k = reshape(w, Shape{1, 1, 1, ws[0], ws[1]});
  return bias_add(conv3d(x, k, {1, 1, 1}, Padding3{}), b);
}

}  // namespace

Padding3 causal_padding(const Shape& k) {
  if (k.size() != 5) throw DimensionError("causal_padding: kernel must be rank 5");
  return Padding3{{{k[0] - 1, 0}, {(k[1] - 1) / 2, k[1] / 2}, {(k[2] - 1) / 2, k[2] / 2}}};
}

Padding3 regular_padding(const Shape& k) {
  if (k.size() != 5) throw DimensionError("regular_padding: kernel must be rank 5");
  return Padding3{
      {{(k[0] - 1) / 2, k[0] / 2}, {(k[1] - 1) / 2, k[1] / 2}, {(k[2] - 1) / 2, k[2] / 2}}};
}

FrameMap FrameMap::downsample(std::int64_t frames, std::int64_t stride) {
  if (stride < 1) throw ShapeError("temporal stride must be >= 1");
  if (frames < 1 || (frames - 1) % stride != 0) {
    throw ShapeError("frame count T = " + std::to_string(frames) +
                     " violates (T - 1) % s == 0 for temporal stride s = " +
                     std::to_string(stride));
  }
  return FrameMap{stride, frames, 1 + (frames - 1) / stride};
}

FrameMap FrameMap::upsample(std::int64_t frames, std::int64_t stride) {
  if (stride < 1) throw ShapeError("temporal stride must be >= 1");
  if (frames < 1) throw ShapeError("frame count must be >= 1");
  return FrameMap{stride, frames, 1 + stride * (frames - 1)};
}

Var causal_conv3d(const Var& input, const Var& kernel, const Stride3& stride) {
  return conv3d(input, kernel, stride, causal_padding(kernel.shape()));
}

Tensor causal_conv3d(const Tensor& input, const Tensor& kernel, const Stride3& stride) {
  return kernels::parallel::conv3d_forward(input, kernel, stride, causal_padding(kernel.shape()));
}

Var temporal_downsample(const Var& input, const Var& kernel, std::int64_t s,
                        std::int64_t spatial_stride) {
  const auto v = video_dims(input.shape(), "temporal_downsample");
  FrameMap::downsample(v.t, s);
  return causal_conv3d(input, kernel, {s, spatial_stride, spatial_stride});
}

Var temporal_upsample(const Var& input, std::int64_t s) {
  auto m = temporal_upsample_map(input.shape(), s);
  return gather(input, std::move(m.shape), std::move(m.src));
}

Tensor temporal_upsample(const Tensor& input, std::int64_t s) {
  return apply(input, temporal_upsample_map(input.shape(), s));
}

Var depth_to_space(const Var& input, std::int64_t r) {
  auto m = depth_to_space_map(input.shape(), r);
  return gather(input, std::move(m.shape), std::move(m.src));
}

Tensor depth_to_space(const Tensor& input, std::int64_t r) {
  return apply(input, depth_to_space_map(input.shape(), r));
}

Tensor space_to_depth(const Tensor& input, std::int64_t r) {
  return apply(input, space_to_depth_map(input.shape(), r));
}

Tensor blur_pool3d(const Tensor& input, const Stride3& stride, bool causal_temporal) {
  const auto v = video_dims(input.shape(), "blur_pool3d");
  for (auto s : stride)
    if (s < 1) throw ShapeError("blur_pool3d: stride must be >= 1");

  // Blur along one axis (extent len, element step `step`) in place over a copy.
  auto blur_axis = [&](Tensor& t, std::int64_t len, std::int64_t step, bool causal) {
    const Tensor src = t;
    const std::int64_t total = t.size();
    const std::int64_t block = len * step;
    for (std::int64_t base = 0; base < total; base += block)
      for (std::int64_t inner = 0; inner < step; ++inner)
        for (std::int64_t i = 0; i < len; ++i) {
          auto at = [&](std::int64_t j) {
            j = std::clamp<std::int64_t>(j, 0, len - 1);
            return src[base + j * step + inner];
          };
          const std::int64_t c = causal ? i - 1 : i;
          t[base + i * step + inner] = 0.25 * at(c - 1) + 0.5 * at(c) + 0.25 * at(c + 1);
        }
  };

  Tensor b = input;
  blur_axis(b, v.t, v.frame_size(), causal_temporal);
  blur_axis(b, v.h, v.w * v.c, false);
  blur_axis(b, v.w, v.c, false);

  const std::int64_t to = (v.t - 1) / stride[0] + 1;
  const std::int64_t ho = (v.h - 1) / stride[1] + 1;
  const std::int64_t wo = (v.w - 1) / stride[2] + 1;
  Tensor out(with_video_dims(input.shape(), to, ho, wo, v.c));
  std::int64_t o = 0;
  for (std::int64_t n = 0; n < v.n; ++n)
    for (std::int64_t t = 0; t < to; ++t)
      for (std::int64_t y = 0; y < ho; ++y)
        for (std::int64_t x = 0; x < wo; ++x)
          for (std::int64_t k = 0; k < v.c; ++k)
            out[o++] = b[(((n * v.t + t * stride[0]) * v.h + y * stride[1]) * v.w + x * stride[2]) *
                             v.c + k];
  return out;
}

Tensor group_norm(const Tensor& x, std::int64_t groups, double eps) {
  return group_norm_forward(x, groups, eps, nullptr);
}

Var group_norm(const Var& x, std::int64_t groups, double eps) {
  NormStats stats;
  Tensor y = group_norm_forward(x.value(), groups, eps, &stats);
  return x.tape()->record(
      std::move(y), {x},
      [x, groups, stats = std::move(stats)](const Tensor& g, std::span<Tensor* const> grads) {
        const Tensor& xv = x.value();
        const auto v = video_dims(xv.shape(), "group_norm");
        const std::int64_t cg = v.c / groups;
        const std::int64_t pix = v.h * v.w;
        const double m = static_cast<double>(pix * cg);
        Tensor& gx = *grads[0];
        for (std::int64_t f = 0; f < v.n * v.t; ++f) {
          const std::int64_t off = f * v.frame_size();
          for (std::int64_t grp = 0; grp < groups; ++grp) {
            const double mean = stats.mean[static_cast<std::size_t>(f * groups + grp)];
            const double inv = stats.inv_std[static_cast<std::size_t>(f * groups + grp)];
            double sg = 0.0, sgx = 0.0;
            for (std::int64_t p = 0; p < pix; ++p)
              for (std::int64_t k = 0; k < cg; ++k) {
                const std::int64_t i = off + p * v.c + grp * cg + k;
                const double xh = (xv[i] - mean) * inv;
                sg += g[i];
                sgx += g[i] * xh;
              }
            sg /= m;
            sgx /= m;
            for (std::int64_t p = 0; p < pix; ++p)
              for (std::int64_t k = 0; k < cg; ++k) {
                const std::int64_t i = off + p * v.c + grp * cg + k;
                const double xh = (xv[i] - mean) * inv;
                gx[i] += inv * (g[i] - sg - xh * sgx);
              }
          }
        }
      });
}

Var resize_control(const Var& control, std::int64_t frames, std::int64_t height,
                   std::int64_t width) {
  const auto c = video_dims(control.shape(), "resize_control");
  std::int64_t s = 1;
  if (c.t > 1) {
    if ((frames - 1) % (c.t - 1) != 0) {
      throw ShapeError("resize_control: " + std::to_string(frames) +
                       " frames are not an upsampling of " + std::to_string(c.t));
    }
    s = (frames - 1) / (c.t - 1);
  } else if (frames != 1) {
    throw ShapeError("resize_control: single-frame control cannot drive " +
                     std::to_string(frames) + " frames");
  }
  if (height % c.h != 0 || width % c.w != 0) {
    throw ShapeError("resize_control: target spatial size not a multiple of the control's");
  }
  Shape out = with_video_dims(control.shape(), frames, height, width, c.c);
  std::vector<std::int64_t> src;
  src.reserve(static_cast<std::size_t>(shape_numel(out)));
  for (std::int64_t n = 0; n < c.n; ++n)
    for (std::int64_t j = 0; j < frames; ++j) {
      const std::int64_t tj = (j + s - 1) / s;
      for (std::int64_t y = 0; y < height; ++y)
        for (std::int64_t x = 0; x < width; ++x) {
          const std::int64_t base =
              (((n * c.t + tj) * c.h + y * c.h / height) * c.w + x * c.w / width) * c.c;
          for (std::int64_t k = 0; k < c.c; ++k) src.push_back(base + k);
        }
    }
  return gather(control, std::move(out), std::move(src));
}

Var adaptive_group_norm(const Var& x, const Var& control, std::int64_t groups,
                        const AdaptiveNormParams& params, double eps) {
  const auto v = video_dims(x.shape(), "adaptive_group_norm");
  const auto cz = video_dims(control.shape(), "adaptive_group_norm control").c;
  if (x.shape().size() != control.shape().size()) {
    throw DimensionError("adaptive_group_norm: x and control must have the same rank");
  }
  check_linear(params.w_gamma, params.b_gamma, cz, v.c, "gamma");
  check_linear(params.w_beta, params.b_beta, cz, v.c, "beta");
  Var normed = group_norm(x, groups, eps);
  Var ctrl = resize_control(control, v.t, v.h, v.w);
  Var gamma = project(ctrl, params.w_gamma, params.b_gamma);
  Var beta = project(ctrl, params.w_beta, params.b_beta);
  return add(add(normed, mul(normed, gamma)), beta);
}

std::int64_t default_groups(std::int64_t channels) {
  std::int64_t g = std::min<std::int64_t>(8, channels);
  while (g > 1 && channels % g != 0) --g;
  return std::max<std::int64_t>(g, 1);
}

}  // namespace lfqv::causal
