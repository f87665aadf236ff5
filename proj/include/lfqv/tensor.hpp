#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lfqv {

using Shape = std::vector<std::int64_t>;

inline constexpr int kMaxRank = 5;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float64 array of rank 0..5. Rank 0 is a scalar.
// Every extent is >= 1 and the element count always equals the product of
// the extents.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor from(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  // Negative axes count from the back.
  std::int64_t dim(int axis) const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }

  // Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Largest absolute elementwise difference; throws DimensionError on shape
// mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

// Views a rank-4 [T,H,W,C] or rank-5 [N,T,H,W,C] tensor as five extents with
// a leading batch axis.
struct VideoDims {
  std::int64_t n, t, h, w, c;
  std::int64_t frame_size() const { return h * w * c; }
};
VideoDims video_dims(const Shape& shape, const char* what);
Shape with_video_dims(const Shape& like, std::int64_t t, std::int64_t h, std::int64_t w,
                      std::int64_t c);

}  // namespace lfqv
