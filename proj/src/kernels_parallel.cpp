#include "kernel_bodies.hpp"
#include "kernel_checks.hpp"

namespace impatient::kernels::parallel {

void conv2d_forward(const ConvGeometry& g, std::span<const float> in,
                    std::span<const float> weight, std::span<const float> bias,
                    std::span<float> out) {
  detail::check_conv(g, in.size(), weight.size(), bias.size(), out.size());
  const auto batch = static_cast<std::ptrdiff_t>(g.batch);
  const auto channels = static_cast<std::ptrdiff_t>(g.out_channels);
  #pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t n = 0; n < batch; ++n) {
    for (std::ptrdiff_t oc = 0; oc < channels; ++oc) {
      detail::conv_forward_plane(g, in.data(), weight.data(), bias.data(), out.data(),
                                 static_cast<std::size_t>(n), static_cast<std::size_t>(oc));
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const float> grad_out,
                           std::span<const float> weight, std::span<float> grad_in) {
  detail::check_conv(g, grad_in.size(), weight.size(), g.out_channels, grad_out.size());
  const auto batch = static_cast<std::ptrdiff_t>(g.batch);
  const auto channels = static_cast<std::ptrdiff_t>(g.in_channels);
  #pragma omp parallel for collapse(2) schedule(static)
  for (std::ptrdiff_t n = 0; n < batch; ++n) {
    for (std::ptrdiff_t ic = 0; ic < channels; ++ic) {
      detail::conv_backward_input_plane(g, grad_out.data(), weight.data(), grad_in.data(),
                                        static_cast<std::size_t>(n), static_cast<std::size_t>(ic));
    }
  }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const float> in,
                            std::span<const float> grad_out, std::span<float> grad_weight,
                            std::span<float> grad_bias) {
  detail::check_conv(g, in.size(), grad_weight.size(), grad_bias.size(), grad_out.size());
  const auto channels = static_cast<std::ptrdiff_t>(g.out_channels);
  #pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oc = 0; oc < channels; ++oc) {
    detail::conv_backward_params_channel(g, in.data(), grad_out.data(), grad_weight.data(),
                                         grad_bias.data(), static_cast<std::size_t>(oc));
  }
}

void dense_forward(const DenseGeometry& g, std::span<const float> in,
                   std::span<const float> weight, std::span<const float> bias,
                   std::span<float> out) {
  detail::check_dense(g, in.size(), weight.size(), bias.size(), out.size());
  const auto rows = static_cast<std::ptrdiff_t>(g.rows);
  #pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    detail::dense_forward_row(g, in.data(), weight.data(), bias.data(), out.data(),
                              static_cast<std::size_t>(r));
  }
}

void dense_backward_input(const DenseGeometry& g, std::span<const float> grad_out,
                          std::span<const float> weight, std::span<float> grad_in) {
  detail::check_dense(g, grad_in.size(), weight.size(), g.out_features, grad_out.size());
  const auto rows = static_cast<std::ptrdiff_t>(g.rows);
  #pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    detail::dense_backward_input_row(g, grad_out.data(), weight.data(), grad_in.data(),
                                     static_cast<std::size_t>(r));
  }
}

void dense_backward_params(const DenseGeometry& g, std::span<const float> in,
                           std::span<const float> grad_out, std::span<float> grad_weight,
                           std::span<float> grad_bias) {
  detail::check_dense(g, in.size(), grad_weight.size(), grad_bias.size(), grad_out.size());
  const auto outputs = static_cast<std::ptrdiff_t>(g.out_features);
  #pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < outputs; ++o) {
    detail::dense_backward_params_output(g, in.data(), grad_out.data(), grad_weight.data(),
                                         grad_bias.data(), static_cast<std::size_t>(o));
  }
}

}  // namespace impatient::kernels::parallel

#include <omp.h>

namespace impatient::kernels {

int max_threads() { return omp_get_max_threads(); }

}  // namespace impatient::kernels
