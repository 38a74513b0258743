#include "impatient/layers.hpp"

#include <algorithm>
#include <cmath>

#include "impatient/error.hpp"

namespace impatient {

namespace {

void require_rank3(const Shape& s, const char* layer) {
  if (s.size() != 3) {
    throw ShapeError(std::string(layer) + " expects C x H x W inputs, got " + shape_string(s));
  }
}

Param make_param(std::string name, Shape shape, bool decay, float fill = 0.0f) {
  Param p{std::move(name), Tensor(shape, fill), Tensor(shape), decay};
  return p;
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv";
    case LayerKind::fully_connected: return "fc";
    case LayerKind::relu: return "relu";
    case LayerKind::max_pool: return "maxpool";
    case LayerKind::avg_pool_global: return "avgpool";
    case LayerKind::avg_pool_grid: return "avgpool_grid";
    case LayerKind::batch_norm: return "batchnorm";
  }
  return "unknown";
}

void he_normal(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
  for (auto& v : t.values()) v = dist(rng);
}

// ---------------------------------------------------------------------------
// Layer

Tensor Layer::forward(const Tensor& input, Mode mode) {
  if (input.rank() < 2) throw ShapeError(to_string(kind()) + ": input must be batched");
  output_shape(input.example_shape());  // validates
  Tensor out = do_forward(input, mode);
  require_finite(out, to_string(kind()) + " forward");
  input_shape_ = input.shape();
  has_cache_ = true;
  return out;
}

Tensor Layer::infer(const Tensor& input) const {
  if (input.rank() < 2) throw ShapeError(to_string(kind()) + ": input must be batched");
  output_shape(input.example_shape());
  Tensor out = do_infer(input);
  require_finite(out, to_string(kind()) + " inference");
  return out;
}

Tensor Layer::backward(const Tensor& grad_output) {
  if (!has_cache_) throw StateError(to_string(kind()) + ": backward called without forward");
  Shape expected = output_shape(Shape(input_shape_.begin() + 1, input_shape_.end()));
  expected.insert(expected.begin(), input_shape_[0]);
  if (grad_output.shape() != expected) {
    throw ShapeError(to_string(kind()) + ": upstream gradient " +
                     shape_string(grad_output.shape()) + " does not match output " +
                     shape_string(expected));
  }
  Tensor grad = do_backward(grad_output);
  require_finite(grad, to_string(kind()) + " backward");
  return grad;
}

void Layer::zero_grad() {
  for (Param* p : params()) p->grad.zero();
}

// ---------------------------------------------------------------------------
// Conv2D

Conv2D::Conv2D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t pad)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      pad_(pad),
      weight_(make_param("weight", {out_channels, in_channels, kernel, kernel}, true)),
      bias_(make_param("bias", {out_channels}, false)) {}

void Conv2D::initialize(std::mt19937_64& rng) {
  he_normal(weight_.value, in_channels_ * kernel_ * kernel_, rng);
  bias_.value.zero();
}

Shape Conv2D::output_shape(const Shape& input) const {
  require_rank3(input, "conv");
  if (input[0] != in_channels_) {
    throw ShapeError("conv expects " + std::to_string(in_channels_) + " channels, got " +
                     shape_string(input));
  }
  if (input[1] + 2 * pad_ < kernel_ || input[2] + 2 * pad_ < kernel_) {
    throw ShapeError("conv kernel larger than padded input " + shape_string(input));
  }
  return {out_channels_, input[1] + 2 * pad_ - kernel_ + 1, input[2] + 2 * pad_ - kernel_ + 1};
}

std::uint64_t Conv2D::macs(const Shape& input) const {
  const Shape out = output_shape(input);
  return static_cast<std::uint64_t>(out[0]) * out[1] * out[2] * in_channels_ * kernel_ * kernel_;
}

kernels::ConvGeometry Conv2D::geometry(const Tensor& input) const {
  return {input.dim(0), in_channels_, input.dim(2), input.dim(3), out_channels_, kernel_, pad_};
}

Tensor Conv2D::do_infer(const Tensor& input) const {
  const auto g = geometry(input);
  Tensor out({g.batch, out_channels_, g.out_height(), g.out_width()});
  kernels::parallel::conv2d_forward(g, input.values(), weight_.value.values(),
                                    bias_.value.values(), out.values());
  return out;
}

Tensor Conv2D::do_forward(const Tensor& input, Mode) {
  input_ = input;
  return do_infer(input);
}

Tensor Conv2D::do_backward(const Tensor& grad_output) {
  const auto g = geometry(input_);
  Tensor grad_input(input_.shape());
  kernels::parallel::conv2d_backward_params(g, input_.values(), grad_output.values(),
                                            weight_.grad.values(), bias_.grad.values());
  kernels::parallel::conv2d_backward_input(g, grad_output.values(), weight_.value.values(),
                                           grad_input.values());
  return grad_input;
}

// ---------------------------------------------------------------------------
// FullyConnected

FullyConnected::FullyConnected(std::size_t in_features, std::size_t out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(make_param("weight", {out_features, in_features}, true)),
      bias_(make_param("bias", {out_features}, false)) {}

void FullyConnected::initialize(std::mt19937_64& rng) {
  he_normal(weight_.value, in_features_, rng);
  bias_.value.zero();
}

Shape FullyConnected::output_shape(const Shape& input) const {
  if (shape_size(input) != in_features_) {
    throw ShapeError("fc expects " + std::to_string(in_features_) + " features, got " +
                     shape_string(input));
  }
  return {out_features_};
}

std::uint64_t FullyConnected::macs(const Shape& input) const {
  output_shape(input);
  return static_cast<std::uint64_t>(in_features_) * out_features_;
}

kernels::DenseGeometry FullyConnected::geometry(const Tensor& input) const {
  return {input.dim(0), in_features_, out_features_};
}

Tensor FullyConnected::do_infer(const Tensor& input) const {
  const auto g = geometry(input);
  Tensor out({g.rows, out_features_});
  kernels::parallel::dense_forward(g, input.values(), weight_.value.values(),
                                   bias_.value.values(), out.values());
  return out;
}

Tensor FullyConnected::do_forward(const Tensor& input, Mode) {
  input_ = input;
  return do_infer(input);
}

Tensor FullyConnected::do_backward(const Tensor& grad_output) {
  const auto g = geometry(input_);
  Tensor grad_input(input_.shape());
  kernels::parallel::dense_backward_params(g, input_.values(), grad_output.values(),
                                           weight_.grad.values(), bias_.grad.values());
  kernels::parallel::dense_backward_input(g, grad_output.values(), weight_.value.values(),
                                          grad_input.values());
  return grad_input;
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::do_infer(const Tensor& input) const {
  Tensor out = input;
  for (auto& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor ReLU::do_forward(const Tensor& input, Mode) {
  input_ = input;
  return do_infer(input);
}

Tensor ReLU::do_backward(const Tensor& grad_output) {
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(input_[i] > 0.0f)) grad[i] = 0.0f;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// MaxPool2D

MaxPool2D::MaxPool2D(std::size_t window) : window_(window) {
  if (window == 0) throw ConfigError("max pool window must be positive");
}

Shape MaxPool2D::output_shape(const Shape& input) const {
  require_rank3(input, "maxpool");
  if (input[1] < window_ || input[2] < window_) {
    throw ShapeError("maxpool window larger than input " + shape_string(input));
  }
  return {input[0], input[1] / window_, input[2] / window_};
}

Tensor MaxPool2D::pool(const Tensor& input, std::vector<std::size_t>* argmax) const {
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h / window_, ow = w / window_;
  Tensor out({n, c, oh, ow});
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const float* src = input.data() + plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++o) {
        std::size_t best = (y * window_) * w + x * window_;
        for (std::size_t dy = 0; dy < window_; ++dy) {
          for (std::size_t dx = 0; dx < window_; ++dx) {
            const std::size_t idx = (y * window_ + dy) * w + x * window_ + dx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        out[o] = src[best];
        if (argmax) (*argmax)[o] = plane * h * w + best;
      }
    }
  }
  return out;
}

Tensor MaxPool2D::do_infer(const Tensor& input) const { return pool(input, nullptr); }

Tensor MaxPool2D::do_forward(const Tensor& input, Mode) { return pool(input, &argmax_); }

Tensor MaxPool2D::do_backward(const Tensor& grad_output) {
  Tensor grad(input_shape_);
  for (std::size_t o = 0; o < grad_output.size(); ++o) grad[argmax_[o]] += grad_output[o];
  return grad;
}

// ---------------------------------------------------------------------------
// AvgPoolGlobal

Shape AvgPoolGlobal::output_shape(const Shape& input) const {
  require_rank3(input, "avgpool");
  return {input[0]};
}

std::uint64_t AvgPoolGlobal::macs(const Shape& input) const {
  output_shape(input);
  return shape_size(input);
}

Tensor AvgPoolGlobal::do_infer(const Tensor& input) const {
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor out({n, c});
  const float scale = 1.0f / static_cast<float>(hw);
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const float* src = input.data() + plane * hw;
    float sum = 0.0f;
    for (std::size_t i = 0; i < hw; ++i) sum += src[i];
    out[plane] = sum * scale;
  }
  return out;
}

Tensor AvgPoolGlobal::do_forward(const Tensor& input, Mode) { return do_infer(input); }

Tensor AvgPoolGlobal::do_backward(const Tensor& grad_output) {
  Tensor grad(input_shape_);
  const std::size_t hw = input_shape_[2] * input_shape_[3];
  const float scale = 1.0f / static_cast<float>(hw);
  for (std::size_t plane = 0; plane < grad_output.size(); ++plane) {
    std::fill_n(grad.data() + plane * hw, hw, grad_output[plane] * scale);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// AvgPoolGrid

AvgPoolGrid::AvgPoolGrid(std::size_t grid) : grid_(grid) {
  if (grid == 0) throw ConfigError("pooling grid must be positive");
}

std::size_t AvgPoolGrid::cell_begin(std::size_t i, std::size_t extent, std::size_t grid) {
  return (i * extent) / grid;
}

std::size_t AvgPoolGrid::cell_end(std::size_t i, std::size_t extent, std::size_t grid) {
  return ((i + 1) * extent + grid - 1) / grid;
}

Shape AvgPoolGrid::output_shape(const Shape& input) const {
  require_rank3(input, "avgpool_grid");
  if (input[1] < grid_ || input[2] < grid_) {
    throw ShapeError("grid pooling needs spatial extent >= " + std::to_string(grid_) + ", got " +
                     shape_string(input));
  }
  return {input[0], grid_, grid_};
}

std::uint64_t AvgPoolGrid::macs(const Shape& input) const {
  output_shape(input);
  std::uint64_t total = 0;
  for (std::size_t gy = 0; gy < grid_; ++gy) {
    for (std::size_t gx = 0; gx < grid_; ++gx) {
      total += (cell_end(gy, input[1], grid_) - cell_begin(gy, input[1], grid_)) *
               (cell_end(gx, input[2], grid_) - cell_begin(gx, input[2], grid_));
    }
  }
  return total * input[0];
}

Tensor AvgPoolGrid::do_infer(const Tensor& input) const {
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor out({n, c, grid_, grid_});
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const float* src = input.data() + plane * h * w;
    for (std::size_t gy = 0; gy < grid_; ++gy) {
      const std::size_t y0 = cell_begin(gy, h, grid_), y1 = cell_end(gy, h, grid_);
      for (std::size_t gx = 0; gx < grid_; ++gx, ++o) {
        const std::size_t x0 = cell_begin(gx, w, grid_), x1 = cell_end(gx, w, grid_);
        float sum = 0.0f;
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t x = x0; x < x1; ++x) sum += src[y * w + x];
        }
        out[o] = sum / static_cast<float>((y1 - y0) * (x1 - x0));
      }
    }
  }
  return out;
}

Tensor AvgPoolGrid::do_forward(const Tensor& input, Mode) { return do_infer(input); }

Tensor AvgPoolGrid::do_backward(const Tensor& grad_output) {
  Tensor grad(input_shape_);
  const std::size_t n = input_shape_[0], c = input_shape_[1], h = input_shape_[2],
                    w = input_shape_[3];
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    float* dst = grad.data() + plane * h * w;
    for (std::size_t gy = 0; gy < grid_; ++gy) {
      const std::size_t y0 = cell_begin(gy, h, grid_), y1 = cell_end(gy, h, grid_);
      for (std::size_t gx = 0; gx < grid_; ++gx, ++o) {
        const std::size_t x0 = cell_begin(gx, w, grid_), x1 = cell_end(gx, w, grid_);
        const float share = grad_output[o] / static_cast<float>((y1 - y0) * (x1 - x0));
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t x = x0; x < x1; ++x) dst[y * w + x] += share;
        }
      }
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(std::size_t channels)
    : channels_(channels),
      gamma_(make_param("gamma", {channels}, false, 1.0f)),
      beta_(make_param("beta", {channels}, false)),
      running_mean_({channels}, 0.0f),
      running_var_({channels}, 1.0f) {}

std::uint64_t BatchNorm::macs(const Shape& input) const { return shape_size(input); }

std::size_t BatchNorm::spatial(const Tensor& input) const {
  const Shape s = input.example_shape();
  if (s.size() == 3 && s[0] == channels_) return s[1] * s[2];
  if (s.size() == 1 && s[0] == channels_) return 1;
  throw ShapeError("batchnorm over " + std::to_string(channels_) + " channels cannot take " +
                   shape_string(s));
}

Tensor BatchNorm::do_infer(const Tensor& input) const {
  const std::size_t n = input.dim(0), hw = spatial(input);
  Tensor out(input.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    const float scale = gamma_.value[c] / std::sqrt(running_var_[c] + kEpsilon);
    const float shift = beta_.value[c] - running_mean_[c] * scale;
    for (std::size_t i = 0; i < n; ++i) {
      const float* src = input.data() + (i * channels_ + c) * hw;
      float* dst = out.data() + (i * channels_ + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) dst[j] = src[j] * scale + shift;
    }
  }
  return out;
}

Tensor BatchNorm::do_forward(const Tensor& input, Mode mode) {
  const std::size_t n = input.dim(0), hw = spatial(input);
  cached_mode_ = mode;
  inv_std_.assign(channels_, 0.0f);
  normalized_ = Tensor(input.shape());
  if (mode == Mode::eval) {
    for (std::size_t c = 0; c < channels_; ++c) {
      inv_std_[c] = 1.0f / std::sqrt(running_var_[c] + kEpsilon);
      for (std::size_t i = 0; i < n; ++i) {
        const float* src = input.data() + (i * channels_ + c) * hw;
        float* xhat = normalized_.data() + (i * channels_ + c) * hw;
        for (std::size_t j = 0; j < hw; ++j) xhat[j] = (src[j] - running_mean_[c]) * inv_std_[c];
      }
    }
    return do_infer(input);
  }

  if (n < 2) throw ShapeError("batchnorm in train mode needs a batch of at least 2");
  const std::size_t count = n * hw;
  Tensor out(input.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    float sum = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
      const float* src = input.data() + (i * channels_ + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) sum += src[j];
    }
    const float mean = sum / static_cast<float>(count);
    float sq = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
      const float* src = input.data() + (i * channels_ + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) sq += (src[j] - mean) * (src[j] - mean);
    }
    const float var = sq / static_cast<float>(count);
    inv_std_[c] = 1.0f / std::sqrt(var + kEpsilon);
    for (std::size_t i = 0; i < n; ++i) {
      const float* src = input.data() + (i * channels_ + c) * hw;
      float* xhat = normalized_.data() + (i * channels_ + c) * hw;
      float* dst = out.data() + (i * channels_ + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        xhat[j] = (src[j] - mean) * inv_std_[c];
        dst[j] = gamma_.value[c] * xhat[j] + beta_.value[c];
      }
    }
    const float unbiased = sq / static_cast<float>(count - 1);
    running_mean_[c] = kMomentum * running_mean_[c] + (1.0f - kMomentum) * mean;
    running_var_[c] = kMomentum * running_var_[c] + (1.0f - kMomentum) * unbiased;
  }
  return out;
}

Tensor BatchNorm::do_backward(const Tensor& grad_output) {
  const std::size_t n = grad_output.dim(0), hw = spatial(grad_output);
  const float count = static_cast<float>(n * hw);
  Tensor grad(grad_output.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    float sum_dy = 0.0f, sum_dy_xhat = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (i * channels_ + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        sum_dy += grad_output[base + j];
        sum_dy_xhat += grad_output[base + j] * normalized_[base + j];
      }
    }
    gamma_.grad[c] += sum_dy_xhat;
    beta_.grad[c] += sum_dy;
    const float g = gamma_.value[c] * inv_std_[c];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t base = (i * channels_ + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        if (cached_mode_ == Mode::eval) {
          grad[base + j] = g * grad_output[base + j];
        } else {
          grad[base + j] = g / count *
                           (count * grad_output[base + j] - sum_dy - normalized_[base + j] * sum_dy_xhat);
        }
      }
    }
  }
  return grad;
}

}  // namespace impatient
