#include "impatient/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "impatient/error.hpp"

namespace impatient {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  for (auto extent : shape_) {
    if (extent == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto extent : shape_) {
    if (extent == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
  }
  return shape_[axis];
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Shape Tensor::example_shape() const {
  if (shape_.size() < 2) throw ShapeError("tensor has no per-example extents: " + shape_string(shape_));
  return Shape(shape_.begin() + 1, shape_.end());
}

std::size_t Tensor::example_size() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

Tensor Tensor::slice_batch(std::size_t begin, std::size_t count) const {
  if (count == 0 || begin + count > batch()) {
    throw ShapeError("batch slice out of range for " + shape_string(shape_));
  }
  Shape shape = shape_;
  shape[0] = count;
  const std::size_t stride = example_size();
  std::vector<float> data(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                          data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * stride));
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::gather_batch(std::span<const std::size_t> rows) const {
  if (rows.empty()) throw ShapeError("cannot gather zero rows");
  Shape shape = shape_;
  shape[0] = rows.size();
  const std::size_t stride = example_size();
  std::vector<float> data(rows.size() * stride);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= batch()) throw ShapeError("gather row out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[i] * stride), stride,
                data.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return Tensor(std::move(shape), std::move(data));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("cannot add " + shape_string(other.shape_) + " to " + shape_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(float scale) {
  for (auto& v : data_) v *= scale;
  return *this;
}

void require_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + where);
}

}  // namespace impatient
