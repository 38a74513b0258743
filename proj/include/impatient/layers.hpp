#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "impatient/kernels.hpp"
#include "impatient/tensor.hpp"

namespace impatient {

enum class Mode { train, eval };

enum class LayerKind {
  conv2d,
  fully_connected,
  relu,
  max_pool,
  avg_pool_global,
  avg_pool_grid,
  batch_norm,
};

std::string to_string(LayerKind kind);

/// A trainable tensor and its gradient buffer (same shape).
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  /// Whether L2 weight decay applies (weights yes, biases and BN affine no).
  bool decay = false;
};

/// Base class of the layer zoo. `forward` caches what `backward` needs;
/// `infer` is the cache-free eval-mode path that may run concurrently on a
/// shared instance. `backward` accumulates into parameter gradients.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;

  /// Per-example output extents for per-example input extents.
  virtual Shape output_shape(const Shape& input) const = 0;
  /// Multiply-accumulate operations per example.
  virtual std::uint64_t macs(const Shape& input) const = 0;

  Tensor forward(const Tensor& input, Mode mode);
  Tensor infer(const Tensor& input) const;
  Tensor backward(const Tensor& grad_output);

  virtual std::vector<Param*> params() { return {}; }
  /// Non-trainable state saved in checkpoints (BN running statistics).
  virtual std::vector<Tensor*> buffers() { return {}; }

  void zero_grad();

  std::string name;

 protected:
  virtual Tensor do_forward(const Tensor& input, Mode mode) = 0;
  virtual Tensor do_infer(const Tensor& input) const = 0;
  virtual Tensor do_backward(const Tensor& grad_output) = 0;

  bool has_cache_ = false;
  Shape input_shape_;
};

class Conv2D : public Layer {
 public:
  Conv2D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t pad);

  LayerKind kind() const override { return LayerKind::conv2d; }
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  /// He (fan-in scaled) Gaussian weights, zero bias.
  void initialize(std::mt19937_64& rng);

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_infer(const Tensor& input) const override;
  Tensor do_backward(const Tensor& grad_output) override;

 private:
  kernels::ConvGeometry geometry(const Tensor& input) const;

  std::size_t in_channels_, out_channels_, kernel_, pad_;
  Param weight_, bias_;
  Tensor input_;
};

/// Flattens all per-example extents into features.
class FullyConnected : public Layer {
 public:
  FullyConnected(std::size_t in_features, std::size_t out_features);

  LayerKind kind() const override { return LayerKind::fully_connected; }
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  void initialize(std::mt19937_64& rng);

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_infer(const Tensor& input) const override;
  Tensor do_backward(const Tensor& grad_output) override;

 private:
  kernels::DenseGeometry geometry(const Tensor& input) const;

  std::size_t in_features_, out_features_;
  Param weight_, bias_;
  Tensor input_;
};

class ReLU : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::relu; }
  Shape output_shape(const Shape& input) const override { return input; }
  std::uint64_t macs(const Shape&) const override { return 0; }

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_infer(const Tensor& input) const override;
  Tensor do_backward(const Tensor& grad_output) override;

 private:
  Tensor input_;
};

/// Non-overlapping square max pooling; trailing rows/columns that do not
/// fill a window are dropped. Ties resolve to the first maximum.
class MaxPool2D : public Layer {
 public:
  explicit MaxPool2D(std::size_t window = 2);

  LayerKind kind() const override { return LayerKind::max_pool; }
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape&) const override { return 0; }

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_infer(const Tensor& input) const override;
  Tensor do_backward(const Tensor& grad_output) override;

 private:
  Tensor pool(const Tensor& input, std::vector<std::size_t>* argmax) const;

  std::size_t window_;
  std::vector<std::size_t> argmax_;
};

/// Mean over the spatial extents: C x H x W -> C.
class AvgPoolGlobal : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::avg_pool_global; }
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_infer(const Tensor& input) const override;
  Tensor do_backward(const Tensor& grad_output) override;
};

/// Averages over a grid x grid partition of the spatial extents:
/// C x H x W -> C x grid x grid. Cell i along an axis of extent S spans
/// [floor(i*S/grid), ceil((i+1)*S/grid)).
class AvgPoolGrid : public Layer {
 public:
  explicit AvgPoolGrid(std::size_t grid = 4);

  LayerKind kind() const override { return LayerKind::avg_pool_grid; }
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;

  static std::size_t cell_begin(std::size_t i, std::size_t extent, std::size_t grid);
  static std::size_t cell_end(std::size_t i, std::size_t extent, std::size_t grid);

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_infer(const Tensor& input) const override;
  Tensor do_backward(const Tensor& grad_output) override;

 private:
  std::size_t grid_;
};

/// Per-channel normalization for C x H x W inputs, per-feature for flat
/// inputs. Running statistics move by exponential averaging in train mode
/// only.
class BatchNorm : public Layer {
 public:
  static constexpr float kEpsilon = 1e-5f;
  static constexpr float kMomentum = 0.9f;

  explicit BatchNorm(std::size_t channels);

  LayerKind kind() const override { return LayerKind::batch_norm; }
  Shape output_shape(const Shape& input) const override { return input; }
  std::uint64_t macs(const Shape& input) const override;
  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  std::vector<Tensor*> buffers() override { return {&running_mean_, &running_var_}; }

  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }

 protected:
  Tensor do_forward(const Tensor& input, Mode mode) override;
  Tensor do_infer(const Tensor& input) const override;
  Tensor do_backward(const Tensor& grad_output) override;

 private:
  // (channels, spatial) view of a batched input.
  std::size_t spatial(const Tensor& input) const;

  std::size_t channels_;
  Param gamma_, beta_;
  Tensor running_mean_, running_var_;
  Tensor normalized_;
  std::vector<float> inv_std_;
  Mode cached_mode_ = Mode::eval;
};

/// Fills a tensor with N(0, 2 / fan_in) samples.
void he_normal(Tensor& t, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace impatient
