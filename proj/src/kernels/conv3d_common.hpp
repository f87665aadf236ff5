#pragma once

#include "lfqv/kernels.hpp"

namespace lfqv::kernels::detail {

// Flattened geometry shared by the serial and parallel kernels.
struct ConvGeom {
  std::int64_t n, ti, hi, wi, ci;      // input
  std::int64_t kt, kh, kw, co;         // kernel
  std::int64_t to, ho, wo;             // output
  std::int64_t st, sh, sw;             // stride
  std::int64_t pt, ph, pw;             // padding before
};

ConvGeom make_geom(const Shape& input, const Shape& kernel, const Stride3& stride,
                   const Padding3& pad);

}  // namespace lfqv::kernels::detail
