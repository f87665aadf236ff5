#include "conv3d_common.hpp"

#include <string>

#include "lfqv/errors.hpp"

#ifdef LFQV_HAVE_OPENMP
#include <omp.h>
#endif

namespace lfqv::kernels {

Shape conv3d_output_shape(const Shape& input, const Shape& kernel, const Stride3& stride,
                          const Padding3& pad) {
  auto v = video_dims(input, "conv3d input");
  if (kernel.size() != 5) {
    throw DimensionError("conv3d kernel must be [kt,kh,kw,Cin,Cout], got " + shape_str(kernel));
  }
  if (kernel[3] != v.c) {
    throw DimensionError("conv3d: input has " + std::to_string(v.c) +
                         " channels but kernel expects " + std::to_string(kernel[3]));
  }
  const std::int64_t in_ext[3] = {v.t, v.h, v.w};
  std::int64_t out_ext[3];
  static const char* kAxis[3] = {"T", "H", "W"};
  for (int a = 0; a < 3; ++a) {
    if (stride[a] < 1) throw DimensionError(std::string("conv3d: stride on ") + kAxis[a] + " < 1");
    if (pad[a][0] < 0 || pad[a][1] < 0) {
      throw DimensionError(std::string("conv3d: negative padding on ") + kAxis[a]);
    }
    const std::int64_t padded = in_ext[a] + pad[a][0] + pad[a][1];
    if (padded < kernel[a]) {
      throw DimensionError(std::string("conv3d: padded extent on ") + kAxis[a] + " (" +
                           std::to_string(padded) + ") smaller than kernel (" +
                           std::to_string(kernel[a]) + ")");
    }
    out_ext[a] = (padded - kernel[a]) / stride[a] + 1;
  }
  return with_video_dims(input, out_ext[0], out_ext[1], out_ext[2], kernel[4]);
}

int max_threads() {
#ifdef LFQV_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace detail {

ConvGeom make_geom(const Shape& input, const Shape& kernel, const Stride3& stride,
                   const Padding3& pad) {
  Shape out = conv3d_output_shape(input, kernel, stride, pad);
  auto vi = video_dims(input, "conv3d input");
  auto vo = video_dims(out, "conv3d output");
  return ConvGeom{vi.n,      vi.t,      vi.h,      vi.w,      vi.c,      kernel[0], kernel[1],
                  kernel[2], kernel[4], vo.t,      vo.h,      vo.w,      stride[0], stride[1],
                  stride[2], pad[0][0], pad[1][0], pad[2][0]};
}

}  // namespace detail
}  // namespace lfqv::kernels
