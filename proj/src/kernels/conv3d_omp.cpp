// Register-blocked direct convolution. Inputs are copied into a zero-padded
// buffer so the inner loops carry no bounds checks; channel axes that are
// vectorized are rounded up to whole 8-lane blocks. Every output element is
// accumulated by one thread in a fixed order (taps, then input channels, as
// in serial::), so results do not depend on the thread count.

#include <algorithm>
#include <cstring>
#include <vector>

#include "conv3d_common.hpp"
#include "lfqv/errors.hpp"

namespace lfqv::kernels::parallel {

using detail::ConvGeom;
using detail::make_geom;

namespace {

constexpr std::int64_t kLanes = 8;
using vec = double __attribute__((vector_size(kLanes * sizeof(double))));

inline vec load(const double* p) {
  vec v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store(double* p, vec v) { std::memcpy(p, &v, sizeof v); }

std::int64_t round_up(std::int64_t v) { return (v + kLanes - 1) / kLanes * kLanes; }

// Zero-padded copy of a [N,T,H,W,C] buffer; channels widened to `cp`.
struct Padded {
  std::int64_t t, h, w, c;
  std::vector<double> data;
};

Padded pad_input(const double* x, std::int64_t n, std::int64_t t, std::int64_t h, std::int64_t w,
                 std::int64_t c, const std::int64_t before[3], const std::int64_t after[3],
                 std::int64_t cp) {
  Padded p{t + before[0] + after[0], h + before[1] + after[1], w + before[2] + after[2], cp, {}};
  p.data.assign(static_cast<std::size_t>(n * p.t * p.h * p.w * cp), 0.0);
#pragma omp parallel for collapse(3) schedule(static)
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ti = 0; ti < t; ++ti)
      for (std::int64_t hi = 0; hi < h; ++hi)
        for (std::int64_t wi = 0; wi < w; ++wi) {
          const double* src = x + (((b * t + ti) * h + hi) * w + wi) * c;
          double* dst = p.data.data() +
                        (((b * p.t + ti + before[0]) * p.h + hi + before[1]) * p.w + wi + before[2]) * cp;
          std::copy(src, src + c, dst);
        }
  return p;
}

struct FwdArgs {
  const Padded* x;
  const double* w;   // [cop / 8][taps][ci][8]
  double* y;         // [N,To,Ho,Wo,co]
  std::int64_t kt, kh, kw, ci, co, cop;
  std::int64_t to, ho, wo;
  std::int64_t st, sh, sw;
};

// NB consecutive output positions along W, one 8-lane output channel block.
template <int NB>
void fwd_block(const FwdArgs& a, std::int64_t n, std::int64_t to, std::int64_t ho,
               std::int64_t wo0, std::int64_t kb) {
  vec acc[NB] = {};
  const Padded& x = *a.x;
  for (std::int64_t dt = 0; dt < a.kt; ++dt)
    for (std::int64_t dh = 0; dh < a.kh; ++dh) {
      const double* xrow =
          x.data.data() + ((n * x.t + to * a.st + dt) * x.h + ho * a.sh + dh) * x.w * x.c;
      for (std::int64_t dw = 0; dw < a.kw; ++dw) {
        const std::int64_t tap = (dt * a.kh + dh) * a.kw + dw;
        const double* wt = a.w + ((kb / kLanes * a.kt * a.kh * a.kw + tap) * a.ci) * kLanes;
        const double* xp[NB];
        for (int j = 0; j < NB; ++j) xp[j] = xrow + ((wo0 + j) * a.sw + dw) * x.c;
        for (std::int64_t c = 0; c < a.ci; ++c) {
          const vec wv = load(wt + c * kLanes);
          for (int j = 0; j < NB; ++j) acc[j] += xp[j][c] * wv;
        }
      }
    }
  for (int j = 0; j < NB; ++j) {
    double* yrow = a.y + (((n * a.to + to) * a.ho + ho) * a.wo + wo0 + j) * a.co + kb;
    const std::int64_t valid = std::min(kLanes, a.co - kb);
    if (valid == kLanes) {
      store(yrow, acc[j]);
    } else {
      for (std::int64_t k = 0; k < valid; ++k) yrow[k] = acc[j][k];
    }
  }
}

void forward_padded(const FwdArgs& a, std::int64_t n) {
  constexpr int kBlock = 4;
  // Channel block outermost keeps its kernel slice cache-resident.
  const std::int64_t kblocks = a.cop / kLanes;
#pragma omp parallel for collapse(4) schedule(static)
  for (std::int64_t kbi = 0; kbi < kblocks; ++kbi)
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t to = 0; to < a.to; ++to)
        for (std::int64_t ho = 0; ho < a.ho; ++ho) {
          const std::int64_t kb = kbi * kLanes;
          std::int64_t wo = 0;
          for (; wo + kBlock <= a.wo; wo += kBlock) fwd_block<kBlock>(a, b, to, ho, wo, kb);
          for (; wo < a.wo; ++wo) fwd_block<1>(a, b, to, ho, wo, kb);
        }
}

// [taps][ci][co] -> [cop / 8][taps][ci][8], zero in the padding lanes. Each
// output channel block then reads one contiguous slice.
std::vector<double> block_kernel(const double* w, std::int64_t taps, std::int64_t ci,
                                 std::int64_t co, std::int64_t cop) {
  std::vector<double> out(static_cast<std::size_t>(taps * ci * cop), 0.0);
  const std::int64_t rows = taps * ci;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t k = 0; k < co; ++k) {
      out[static_cast<std::size_t>(((k / kLanes) * rows + r) * kLanes + k % kLanes)] = w[r * co + k];
    }
  return out;
}

// Strided fallback for the input gradient: each input element gathers from
// the outputs that read it.
Tensor backward_input_gather(const ConvGeom& g, const Tensor& grad_out, const Tensor& kernel,
                             const Shape& input_shape) {
  const std::int64_t taps = g.kt * g.kh * g.kw;
  std::vector<double> wt(static_cast<std::size_t>(taps * g.ci * g.co));
  const double* w = kernel.data().data();
  for (std::int64_t tap = 0; tap < taps; ++tap)
    for (std::int64_t c = 0; c < g.ci; ++c)
      for (std::int64_t k = 0; k < g.co; ++k)
        wt[static_cast<std::size_t>((tap * g.co + k) * g.ci + c)] = w[(tap * g.ci + c) * g.co + k];

  Tensor gx(input_shape);
  const double* gy = grad_out.data().data();
  const double* wtp = wt.data();
  double* gxp = gx.data().data();
#pragma omp parallel for collapse(3) schedule(static)
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t ti = 0; ti < g.ti; ++ti)
      for (std::int64_t hi = 0; hi < g.hi; ++hi)
        for (std::int64_t wi = 0; wi < g.wi; ++wi) {
          double* gxrow = gxp + (((n * g.ti + ti) * g.hi + hi) * g.wi + wi) * g.ci;
          for (std::int64_t dt = 0; dt < g.kt; ++dt) {
            const std::int64_t nt = ti + g.pt - dt;
            if (nt < 0 || nt % g.st) continue;
            const std::int64_t to = nt / g.st;
            if (to >= g.to) continue;
            for (std::int64_t dh = 0; dh < g.kh; ++dh) {
              const std::int64_t nh = hi + g.ph - dh;
              if (nh < 0 || nh % g.sh) continue;
              const std::int64_t ho = nh / g.sh;
              if (ho >= g.ho) continue;
              for (std::int64_t dw = 0; dw < g.kw; ++dw) {
                const std::int64_t nw = wi + g.pw - dw;
                if (nw < 0 || nw % g.sw) continue;
                const std::int64_t wo = nw / g.sw;
                if (wo >= g.wo) continue;
                const double* gyrow = gy + (((n * g.to + to) * g.ho + ho) * g.wo + wo) * g.co;
                const double* wtap = wtp + ((dt * g.kh + dh) * g.kw + dw) * g.co * g.ci;
                for (std::int64_t k = 0; k < g.co; ++k) {
                  const double gv = gyrow[k];
                  const double* wk = wtap + k * g.ci;
                  for (std::int64_t c = 0; c < g.ci; ++c) gxrow[c] += gv * wk[c];
                }
              }
            }
          }
        }
  return gx;
}

}  // namespace

Tensor conv3d_forward(const Tensor& input, const Tensor& kernel, const Stride3& stride,
                      const Padding3& pad) {
  const ConvGeom g = make_geom(input.shape(), kernel.shape(), stride, pad);
  Tensor out(conv3d_output_shape(input.shape(), kernel.shape(), stride, pad));
  const std::int64_t before[3] = {pad[0][0], pad[1][0], pad[2][0]};
  const std::int64_t after[3] = {pad[0][1], pad[1][1], pad[2][1]};
  const Padded xp = pad_input(input.data().data(), g.n, g.ti, g.hi, g.wi, g.ci, before, after, g.ci);
  const std::int64_t cop = round_up(g.co);
  const auto wk = block_kernel(kernel.data().data(), g.kt * g.kh * g.kw, g.ci, g.co, cop);
  const FwdArgs a{&xp,  wk.data(), out.data().data(), g.kt, g.kh, g.kw, g.ci, g.co, cop,
                  g.to, g.ho,      g.wo,              g.st, g.sh, g.sw};
  forward_padded(a, g.n);
  return out;
}

// With unit stride the input gradient is a forward correlation of the
// output gradient with the flipped, channel-transposed kernel.
Tensor conv3d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             const Shape& input_shape, const Stride3& stride,
                             const Padding3& pad) {
  const ConvGeom g = make_geom(input_shape, kernel.shape(), stride, pad);
  if (grad_out.shape() != conv3d_output_shape(input_shape, kernel.shape(), stride, pad)) {
    throw DimensionError("conv3d_backward_input: gradient shape mismatch");
  }
  const std::int64_t ks[3] = {g.kt, g.kh, g.kw};
  bool direct = stride == Stride3{1, 1, 1};
  std::int64_t before[3], after[3];
  for (int a = 0; a < 3; ++a) {
    before[a] = ks[a] - 1 - pad[a][0];
    after[a] = ks[a] - 1 - pad[a][1];
    direct = direct && before[a] >= 0 && after[a] >= 0;
  }
  if (!direct) return backward_input_gather(g, grad_out, kernel, input_shape);

  const Padded gyp =
      pad_input(grad_out.data().data(), g.n, g.to, g.ho, g.wo, g.co, before, after, g.co);
  const std::int64_t cip = round_up(g.ci);
  const std::int64_t taps = g.kt * g.kh * g.kw;
  // flipped[tap'][k][c] = w[taps - 1 - tap'][c][k], stored blocked over c.
  std::vector<double> flipped(static_cast<std::size_t>(taps * g.co * cip), 0.0);
  const double* w = kernel.data().data();
  const std::int64_t rows = taps * g.co;
  for (std::int64_t tap = 0; tap < taps; ++tap)
    for (std::int64_t c = 0; c < g.ci; ++c)
      for (std::int64_t k = 0; k < g.co; ++k) {
        const std::int64_t r = (taps - 1 - tap) * g.co + k;
        flipped[static_cast<std::size_t>(((c / kLanes) * rows + r) * kLanes + c % kLanes)] =
            w[(tap * g.ci + c) * g.co + k];
      }
  Tensor gx(input_shape);
  const FwdArgs a{&gyp, flipped.data(), gx.data().data(), g.kt, g.kh, g.kw, g.co, g.ci, cip,
                  g.ti, g.hi,           g.wi,             1,    1,    1};
  forward_padded(a, g.n);
  return gx;
}

// Each (tap, input-channel block, output-channel block) task owns its slice
// of the kernel gradient and sums over output positions in raster order.
Tensor conv3d_backward_kernel(const Tensor& grad_out, const Tensor& input,
                              const Shape& kernel_shape, const Stride3& stride,
                              const Padding3& pad) {
  const ConvGeom g = make_geom(input.shape(), kernel_shape, stride, pad);
  if (grad_out.shape() != conv3d_output_shape(input.shape(), kernel_shape, stride, pad)) {
    throw DimensionError("conv3d_backward_kernel: gradient shape mismatch");
  }
  const std::int64_t before[3] = {pad[0][0], pad[1][0], pad[2][0]};
  const std::int64_t after[3] = {pad[0][1], pad[1][1], pad[2][1]};
  const std::int64_t cip = round_up(g.ci), cop = round_up(g.co);
  const Padded xp = pad_input(input.data().data(), g.n, g.ti, g.hi, g.wi, g.ci, before, after, cip);
  const std::int64_t positions = g.n * g.to * g.ho * g.wo;
  std::vector<double> gyw(static_cast<std::size_t>(positions * cop), 0.0);
  for (std::int64_t p = 0; p < positions; ++p) {
    const double* src = grad_out.data().data() + p * g.co;
    std::copy(src, src + g.co, gyw.data() + p * cop);
  }

  Tensor gw(kernel_shape);
  double* gwp = gw.data().data();
  const std::int64_t taps = g.kt * g.kh * g.kw;
  const std::int64_t cblocks = cip / kLanes, kblocks = cop / kLanes;
  const std::int64_t tasks = taps * cblocks * kblocks;
#pragma omp parallel for schedule(static)
  for (std::int64_t task = 0; task < tasks; ++task) {
    const std::int64_t kb = (task % kblocks) * kLanes;
    const std::int64_t cb = ((task / kblocks) % cblocks) * kLanes;
    const std::int64_t tap = task / (kblocks * cblocks);
    const std::int64_t dw = tap % g.kw, dh = (tap / g.kw) % g.kh, dt = tap / (g.kw * g.kh);
    vec acc[kLanes] = {};
    for (std::int64_t n = 0; n < g.n; ++n)
      for (std::int64_t to = 0; to < g.to; ++to)
        for (std::int64_t ho = 0; ho < g.ho; ++ho) {
          const double* xrow = xp.data.data() +
                               ((n * xp.t + to * g.st + dt) * xp.h + ho * g.sh + dh) * xp.w * cip;
          const double* gyrow = gyw.data() + ((n * g.to + to) * g.ho + ho) * g.wo * cop + kb;
          for (std::int64_t wo = 0; wo < g.wo; ++wo) {
            const vec gv = load(gyrow + wo * cop);
            const double* xv = xrow + (wo * g.sw + dw) * cip + cb;
            for (std::int64_t j = 0; j < kLanes; ++j) acc[j] += xv[j] * gv;
          }
        }
    for (std::int64_t j = 0; j < kLanes && cb + j < g.ci; ++j) {
      double* dst = gwp + (tap * g.ci + cb + j) * g.co + kb;
      for (std::int64_t k = 0; k < kLanes && kb + k < g.co; ++k) dst[k] = acc[j][k];
    }
  }
  return gw;
}

}  // namespace lfqv::kernels::parallel
