#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "impatient/data.hpp"
#include "impatient/layers.hpp"
#include "impatient/tensor.hpp"

namespace impatient::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor t(shape);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

inline void randomize(Tensor& t, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  for (auto& v : t.values()) v = dist(rng);
}

// sum_i y_i * r_i, accumulated in double.
inline double project(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * r[i];
  return s;
}

inline double norm_relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / scale;
}

// Numerical derivative of `loss` with respect to every entry of `values`,
// compared with `analytic` by norm-wise relative error. Central
// differences, except where the one-sided slopes disagree (a ReLU or
// max-pool kink within one step): there the side that stays stable when
// the step is halved gives a second-order one-sided estimate.
inline std::vector<double> numeric_gradient(const std::function<double()>& loss, std::span<float> values,
                                            float step = 1e-3f) {
  std::vector<double> numeric(values.size());
  const double base = loss();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float saved = values[i];
    const auto slope = [&](float h) {
      const float moved = saved + h;
      values[i] = moved;
      const double l = loss();
      values[i] = saved;
      return (l - base) / (static_cast<double>(moved) - saved);
    };
    const double up = slope(step), down = slope(-step);
    numeric[i] = 0.5 * (up + down);
    if (std::abs(up - down) > 0.01 * std::max(std::abs(numeric[i]), 0.1)) {
      const double up_half = slope(step / 2), down_half = slope(-step / 2);
      numeric[i] = std::abs(up - up_half) < std::abs(down - down_half) ? 2 * up_half - up
                                                                        : 2 * down_half - down;
    }
  }
  return numeric;
}

inline double finite_difference_error(const std::function<double()>& loss, std::span<float> values,
                                      std::span<const float> analytic, float step = 1e-3f) {
  const std::vector<double> exact(analytic.begin(), analytic.end());
  return norm_relative_error(exact, numeric_gradient(loss, values, step));
}

// Two linearly separable blobs in 1 x 4 x 4 images.
inline Dataset separable_toy(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  Dataset d;
  d.num_classes = 2;
  d.images = Tensor({2 * per_class, 1, 4, 4});
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < 16; ++j) {
      const bool left = (j % 4) < 2;
      const float base = (left == (label == 0)) ? 1.0f : 0.0f;
      d.images[i * 16 + j] = base + noise(rng);
    }
    d.labels.push_back(label);
  }
  d.splits.assign(d.labels.size(), Split::train);
  return d;
}

}  // namespace impatient::testing
