#pragma once

// Convolution and dense kernels. `serial` is the reference implementation;
// `parallel` distributes independent outputs over OpenMP threads. Both
// share the same per-output summation order, so their results are bitwise
// identical for any thread count.

#include <cstddef>
#include <span>

namespace impatient::kernels {

/// Stride-1, zero-padded square convolution over NCHW tensors.
struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t pad = 0;

  std::size_t out_height() const { return height + 2 * pad - kernel + 1; }
  std::size_t out_width() const { return width + 2 * pad - kernel + 1; }
  std::size_t weight_size() const { return out_channels * in_channels * kernel * kernel; }
};

/// out[r, o] = bias[o] + sum_i weight[o, i] * in[r, i]
struct DenseGeometry {
  std::size_t rows = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
};

#define IMPATIENT_DECLARE_KERNELS                                                         \
  void conv2d_forward(const ConvGeometry& g, std::span<const float> in,                  \
                      std::span<const float> weight, std::span<const float> bias,        \
                      std::span<float> out);                                             \
  /* Overwrites grad_in. */                                                              \
  void conv2d_backward_input(const ConvGeometry& g, std::span<const float> grad_out,     \
                             std::span<const float> weight, std::span<float> grad_in);   \
  /* Accumulates into grad_weight and grad_bias. */                                      \
  void conv2d_backward_params(const ConvGeometry& g, std::span<const float> in,          \
                              std::span<const float> grad_out,                           \
                              std::span<float> grad_weight, std::span<float> grad_bias); \
  void dense_forward(const DenseGeometry& g, std::span<const float> in,                  \
                     std::span<const float> weight, std::span<const float> bias,         \
                     std::span<float> out);                                              \
  void dense_backward_input(const DenseGeometry& g, std::span<const float> grad_out,     \
                            std::span<const float> weight, std::span<float> grad_in);    \
  void dense_backward_params(const DenseGeometry& g, std::span<const float> in,          \
                             std::span<const float> grad_out,                            \
                             std::span<float> grad_weight, std::span<float> grad_bias);

namespace serial {
IMPATIENT_DECLARE_KERNELS
}  // namespace serial

namespace parallel {
IMPATIENT_DECLARE_KERNELS
}  // namespace parallel

#undef IMPATIENT_DECLARE_KERNELS

/// Number of OpenMP threads the parallel kernels will use.
int max_threads();

}  // namespace impatient::kernels
