#pragma once

#include <span>
#include <string>

#include "impatient/error.hpp"
#include "impatient/kernels.hpp"

namespace impatient::kernels::detail {

inline void expect_size(std::size_t actual, std::size_t expected, const char* what) {
  if (actual != expected) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) +
                     " values, got " + std::to_string(actual));
  }
}

inline void check_conv(const ConvGeometry& g, std::size_t in, std::size_t weight,
                       std::size_t bias, std::size_t out) {
  if (g.kernel == 0 || g.height + 2 * g.pad < g.kernel || g.width + 2 * g.pad < g.kernel) {
    throw ShapeError("convolution kernel larger than padded input");
  }
  expect_size(in, g.batch * g.in_channels * g.height * g.width, "conv input");
  expect_size(weight, g.weight_size(), "conv weight");
  expect_size(bias, g.out_channels, "conv bias");
  expect_size(out, g.batch * g.out_channels * g.out_height() * g.out_width(), "conv output");
}

inline void check_dense(const DenseGeometry& g, std::size_t in, std::size_t weight,
                        std::size_t bias, std::size_t out) {
  expect_size(in, g.rows * g.in_features, "dense input");
  expect_size(weight, g.out_features * g.in_features, "dense weight");
  expect_size(bias, g.out_features, "dense bias");
  expect_size(out, g.rows * g.out_features, "dense output");
}

}  // namespace impatient::kernels::detail
