#include "conv3d_common.hpp"
#include "lfqv/errors.hpp"

namespace lfqv::kernels::serial {

using detail::ConvGeom;
using detail::make_geom;

Tensor conv3d_forward(const Tensor& input, const Tensor& kernel, const Stride3& stride,
                      const Padding3& pad) {
  const ConvGeom g = make_geom(input.shape(), kernel.shape(), stride, pad);
  Tensor out(conv3d_output_shape(input.shape(), kernel.shape(), stride, pad));
  const double* x = input.data().data();
  const double* w = kernel.data().data();
  double* y = out.data().data();

  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t to = 0; to < g.to; ++to)
      for (std::int64_t ho = 0; ho < g.ho; ++ho)
        for (std::int64_t wo = 0; wo < g.wo; ++wo) {
          double* yrow = y + (((n * g.to + to) * g.ho + ho) * g.wo + wo) * g.co;
          for (std::int64_t dt = 0; dt < g.kt; ++dt) {
            const std::int64_t ti = to * g.st - g.pt + dt;
            if (ti < 0 || ti >= g.ti) continue;
            for (std::int64_t dh = 0; dh < g.kh; ++dh) {
              const std::int64_t hi = ho * g.sh - g.ph + dh;
              if (hi < 0 || hi >= g.hi) continue;
              for (std::int64_t dw = 0; dw < g.kw; ++dw) {
                const std::int64_t wi = wo * g.sw - g.pw + dw;
                if (wi < 0 || wi >= g.wi) continue;
                const double* xrow = x + (((n * g.ti + ti) * g.hi + hi) * g.wi + wi) * g.ci;
                const double* wtap = w + ((dt * g.kh + dh) * g.kw + dw) * g.ci * g.co;
                for (std::int64_t c = 0; c < g.ci; ++c) {
                  const double xv = xrow[c];
                  const double* wc = wtap + c * g.co;
                  for (std::int64_t k = 0; k < g.co; ++k) yrow[k] += xv * wc[k];
                }
              }
            }
          }
        }
  return out;
}

Tensor conv3d_backward_input(const Tensor& grad_out, const Tensor& kernel,
                             const Shape& input_shape, const Stride3& stride,
                             const Padding3& pad) {
  const ConvGeom g = make_geom(input_shape, kernel.shape(), stride, pad);
  if (grad_out.shape() != conv3d_output_shape(input_shape, kernel.shape(), stride, pad)) {
    throw DimensionError("conv3d_backward_input: gradient shape mismatch");
  }
  Tensor gx(input_shape);
  const double* gy = grad_out.data().data();
  const double* w = kernel.data().data();
  double* gxp = gx.data().data();

  // Scatter form: each output position pushes into the inputs it read.
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t to = 0; to < g.to; ++to)
      for (std::int64_t ho = 0; ho < g.ho; ++ho)
        for (std::int64_t wo = 0; wo < g.wo; ++wo) {
          const double* gyrow = gy + (((n * g.to + to) * g.ho + ho) * g.wo + wo) * g.co;
          for (std::int64_t dt = 0; dt < g.kt; ++dt) {
            const std::int64_t ti = to * g.st - g.pt + dt;
            if (ti < 0 || ti >= g.ti) continue;
            for (std::int64_t dh = 0; dh < g.kh; ++dh) {
              const std::int64_t hi = ho * g.sh - g.ph + dh;
              if (hi < 0 || hi >= g.hi) continue;
              for (std::int64_t dw = 0; dw < g.kw; ++dw) {
                const std::int64_t wi = wo * g.sw - g.pw + dw;
                if (wi < 0 || wi >= g.wi) continue;
                double* gxrow = gxp + (((n * g.ti + ti) * g.hi + hi) * g.wi + wi) * g.ci;
                const double* wtap = w + ((dt * g.kh + dh) * g.kw + dw) * g.ci * g.co;
                for (std::int64_t c = 0; c < g.ci; ++c) {
                  const double* wc = wtap + c * g.co;
                  double acc = 0.0;
                  for (std::int64_t k = 0; k < g.co; ++k) acc += gyrow[k] * wc[k];
                  gxrow[c] += acc;
                }
              }
            }
          }
        }
  return gx;
}

Tensor conv3d_backward_kernel(const Tensor& grad_out, const Tensor& input,
                              const Shape& kernel_shape, const Stride3& stride,
                              const Padding3& pad) {
  const ConvGeom g = make_geom(input.shape(), kernel_shape, stride, pad);
  if (grad_out.shape() != conv3d_output_shape(input.shape(), kernel_shape, stride, pad)) {
    throw DimensionError("conv3d_backward_kernel: gradient shape mismatch");
  }
  Tensor gw(kernel_shape);
  const double* gy = grad_out.data().data();
  const double* x = input.data().data();
  double* gwp = gw.data().data();

  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t to = 0; to < g.to; ++to)
      for (std::int64_t ho = 0; ho < g.ho; ++ho)
        for (std::int64_t wo = 0; wo < g.wo; ++wo) {
          const double* gyrow = gy + (((n * g.to + to) * g.ho + ho) * g.wo + wo) * g.co;
          for (std::int64_t dt = 0; dt < g.kt; ++dt) {
            const std::int64_t ti = to * g.st - g.pt + dt;
            if (ti < 0 || ti >= g.ti) continue;
            for (std::int64_t dh = 0; dh < g.kh; ++dh) {
              const std::int64_t hi = ho * g.sh - g.ph + dh;
              if (hi < 0 || hi >= g.hi) continue;
              for (std::int64_t dw = 0; dw < g.kw; ++dw) {
                const std::int64_t wi = wo * g.sw - g.pw + dw;
                if (wi < 0 || wi >= g.wi) continue;
                const double* xrow = x + (((n * g.ti + ti) * g.hi + hi) * g.wi + wi) * g.ci;
                double* gtap = gwp + ((dt * g.kh + dh) * g.kw + dw) * g.ci * g.co;
                for (std::int64_t c = 0; c < g.ci; ++c) {
                  const double xv = xrow[c];
                  double* gc = gtap + c * g.co;
                  for (std::int64_t k = 0; k < g.co; ++k) gc[k] += xv * gyrow[k];
                }
              }
            }
          }
        }
  return gw;
}

}  // namespace lfqv::kernels::serial
