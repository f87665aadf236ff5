#include "lfqv/tensor.hpp"

#include <cmath>
#include <sstream>

#include "lfqv/errors.hpp"

namespace lfqv {

namespace {

void check_shape(const Shape& shape) {
  if (shape.size() > static_cast<std::size_t>(kMaxRank)) {
    throw DimensionError("tensor rank " + std::to_string(shape.size()) + " exceeds " +
                         std::to_string(kMaxRank));
  }
  for (auto e : shape) {
    if (e < 1) throw DimensionError("tensor extent must be >= 1, got shape " + shape_str(shape));
  }
}

}  // namespace

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor(Shape{static_cast<std::int64_t>(values.size())}, std::vector<double>(values));
}

std::int64_t Tensor::dim(int axis) const {
  int r = rank();
  int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape_));
  }
  return shape_[static_cast<std::size_t>(a)];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

VideoDims video_dims(const Shape& shape, const char* what) {
  if (shape.size() == 4) return {1, shape[0], shape[1], shape[2], shape[3]};
  if (shape.size() == 5) return {shape[0], shape[1], shape[2], shape[3], shape[4]};
  throw DimensionError(std::string(what) + ": expected [T,H,W,C] or [N,T,H,W,C], got " +
                       shape_str(shape));
}

Shape with_video_dims(const Shape& like, std::int64_t t, std::int64_t h, std::int64_t w,
                      std::int64_t c) {
  if (like.size() == 5) return {like[0], t, h, w, c};
  return {t, h, w, c};
}

}  // namespace lfqv
