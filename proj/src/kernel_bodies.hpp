#pragma once

// Per-output work units shared by the serial and parallel kernels.

#include <algorithm>
#include <cstddef>

#include "impatient/kernels.hpp"

namespace impatient::kernels::detail {

// Valid output range [lo, hi) for a kernel tap at offset `tap` such that
// the input index o + tap - pad lies in [0, extent).
inline void tap_range(std::size_t tap, std::size_t pad, std::size_t extent, std::size_t out_extent,
                      std::size_t& lo, std::size_t& hi) {
  lo = tap < pad ? pad - tap : 0;
  const std::size_t limit = extent + pad - tap;  // o < extent + pad - tap
  hi = std::min(out_extent, limit);
  if (hi < lo) hi = lo;
}

// One (example, output channel) plane of the forward convolution.
inline void conv_forward_plane(const ConvGeometry& g, const float* in, const float* weight,
                               const float* bias, float* out, std::size_t n, std::size_t oc) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  float* dst = out + (n * g.out_channels + oc) * oh * ow;
  std::fill(dst, dst + oh * ow, bias[oc]);
  for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
    const float* src = in + (n * g.in_channels + ic) * g.height * g.width;
    const float* w = weight + (oc * g.in_channels + ic) * g.kernel * g.kernel;
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      std::size_t y0, y1;
      tap_range(kh, g.pad, g.height, oh, y0, y1);
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        std::size_t x0, x1;
        tap_range(kw, g.pad, g.width, ow, x0, x1);
        const float wv = w[kh * g.kernel + kw];
        for (std::size_t y = y0; y < y1; ++y) {
          const float* s = src + (y + kh - g.pad) * g.width + (x0 + kw - g.pad);
          float* d = dst + y * ow + x0;
          for (std::size_t x = 0; x < x1 - x0; ++x) d[x] += wv * s[x];
        }
      }
    }
  }
}

// One (example, input channel) plane of the input gradient.
inline void conv_backward_input_plane(const ConvGeometry& g, const float* grad_out,
                                      const float* weight, float* grad_in, std::size_t n,
                                      std::size_t ic) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  float* dst = grad_in + (n * g.in_channels + ic) * g.height * g.width;
  std::fill(dst, dst + g.height * g.width, 0.0f);
  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    const float* go = grad_out + (n * g.out_channels + oc) * oh * ow;
    const float* w = weight + (oc * g.in_channels + ic) * g.kernel * g.kernel;
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      std::size_t y0, y1;
      tap_range(kh, g.pad, g.height, oh, y0, y1);
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        std::size_t x0, x1;
        tap_range(kw, g.pad, g.width, ow, x0, x1);
        const float wv = w[kh * g.kernel + kw];
        for (std::size_t y = y0; y < y1; ++y) {
          float* d = dst + (y + kh - g.pad) * g.width + (x0 + kw - g.pad);
          const float* s = go + y * ow + x0;
          for (std::size_t x = 0; x < x1 - x0; ++x) d[x] += wv * s[x];
        }
      }
    }
  }
}

// All parameter gradients of one output channel, accumulated over the batch
// in example order.
inline void conv_backward_params_channel(const ConvGeometry& g, const float* in,
                                         const float* grad_out, float* grad_weight,
                                         float* grad_bias, std::size_t oc) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n) {
    const float* go = grad_out + (n * g.out_channels + oc) * oh * ow;
    float bias_sum = 0.0f;
    for (std::size_t i = 0; i < oh * ow; ++i) bias_sum += go[i];
    grad_bias[oc] += bias_sum;
    for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
      const float* src = in + (n * g.in_channels + ic) * g.height * g.width;
      float* gw = grad_weight + (oc * g.in_channels + ic) * g.kernel * g.kernel;
      for (std::size_t kh = 0; kh < g.kernel; ++kh) {
        std::size_t y0, y1;
        tap_range(kh, g.pad, g.height, oh, y0, y1);
        for (std::size_t kw = 0; kw < g.kernel; ++kw) {
          std::size_t x0, x1;
          tap_range(kw, g.pad, g.width, ow, x0, x1);
          float sum = 0.0f;
          for (std::size_t y = y0; y < y1; ++y) {
            const float* s = src + (y + kh - g.pad) * g.width + (x0 + kw - g.pad);
            const float* d = go + y * ow + x0;
            for (std::size_t x = 0; x < x1 - x0; ++x) sum += d[x] * s[x];
          }
          gw[kh * g.kernel + kw] += sum;
        }
      }
    }
  }
}

inline void dense_forward_row(const DenseGeometry& g, const float* in, const float* weight,
                              const float* bias, float* out, std::size_t r) {
  const float* x = in + r * g.in_features;
  float* y = out + r * g.out_features;
  for (std::size_t o = 0; o < g.out_features; ++o) {
    const float* w = weight + o * g.in_features;
    float sum = 0.0f;
    for (std::size_t i = 0; i < g.in_features; ++i) sum += w[i] * x[i];
    y[o] = bias[o] + sum;
  }
}

inline void dense_backward_input_row(const DenseGeometry& g, const float* grad_out,
                                     const float* weight, float* grad_in, std::size_t r) {
  const float* go = grad_out + r * g.out_features;
  float* gi = grad_in + r * g.in_features;
  std::fill(gi, gi + g.in_features, 0.0f);
  for (std::size_t o = 0; o < g.out_features; ++o) {
    const float* w = weight + o * g.in_features;
    const float gv = go[o];
    for (std::size_t i = 0; i < g.in_features; ++i) gi[i] += gv * w[i];
  }
}

inline void dense_backward_params_output(const DenseGeometry& g, const float* in,
                                         const float* grad_out, float* grad_weight,
                                         float* grad_bias, std::size_t o) {
  float* gw = grad_weight + o * g.in_features;
  for (std::size_t r = 0; r < g.rows; ++r) {
    const float gv = grad_out[r * g.out_features + o];
    grad_bias[o] += gv;
    const float* x = in + r * g.in_features;
    for (std::size_t i = 0; i < g.in_features; ++i) gw[i] += gv * x[i];
  }
}

}  // namespace impatient::kernels::detail
