#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace impatient {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major float tensor. Batched activations use the leading
/// extent as the batch dimension (N x C x H x W or N x F).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  void fill(float value);
  void zero() { fill(0.0f); }

  /// Same data, new extents; the element count must match.
  Tensor reshaped(Shape shape) const;

  /// Leading extent, i.e. the batch size for batched activations.
  std::size_t batch() const { return shape_.empty() ? 0 : shape_[0]; }
  /// Extents after the batch dimension.
  Shape example_shape() const;
  std::size_t example_size() const;

  /// Copies rows [begin, begin + count) along the batch dimension.
  Tensor slice_batch(std::size_t begin, std::size_t count) const;
  /// Gathers the given rows along the batch dimension.
  Tensor gather_batch(std::span<const std::size_t> rows) const;

  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(float scale);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Throws NumericError naming `where` if the tensor holds NaN or Inf.
void require_finite(const Tensor& t, const std::string& where);

}  // namespace impatient
