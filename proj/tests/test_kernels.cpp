#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "impatient/error.hpp"
#include "impatient/kernels.hpp"

using namespace impatient;
namespace k = impatient::kernels;

namespace {

std::vector<float> random_values(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

// Straightforward padded-input loops, accumulated in double.
std::vector<double> naive_conv(const k::ConvGeometry& g, const std::vector<float>& in,
                               const std::vector<float>& w, const std::vector<float>& b) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  std::vector<double> out(g.batch * g.out_channels * oh * ow);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double s = b[o];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < g.kernel; ++ky)
              for (std::size_t kx = 0; kx < g.kernel; ++kx) {
                const long iy = static_cast<long>(y + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(x + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.height) || ix >= static_cast<long>(g.width)) continue;
                s += static_cast<double>(w[((o * g.in_channels + c) * g.kernel + ky) * g.kernel + kx]) *
                     in[((n * g.in_channels + c) * g.height + iy) * g.width + ix];
              }
          out[((n * g.out_channels + o) * oh + y) * ow + x] = s;
        }
  return out;
}

struct ConvCase {
  std::size_t batch, in_c, h, w, out_c, kernel, pad;
};

class ConvKernels : public ::testing::TestWithParam<ConvCase> {};

}  // namespace

TEST_P(ConvKernels, SerialMatchesNaiveAndParallelIsBitwiseEqual) {
  const auto c = GetParam();
  const k::ConvGeometry g{c.batch, c.in_c, c.h, c.w, c.out_c, c.kernel, c.pad};
  std::mt19937_64 rng(42);
  const auto in = random_values(g.batch * g.in_channels * g.height * g.width, rng);
  const auto w = random_values(g.weight_size(), rng);
  const auto b = random_values(g.out_channels, rng);
  const std::size_t out_size = g.batch * g.out_channels * g.out_height() * g.out_width();

  std::vector<float> s_out(out_size), p_out(out_size);
  k::serial::conv2d_forward(g, in, w, b, s_out);
  k::parallel::conv2d_forward(g, in, w, b, p_out);
  EXPECT_EQ(s_out, p_out);
  const auto ref = naive_conv(g, in, w, b);
  for (std::size_t i = 0; i < out_size; ++i) EXPECT_NEAR(s_out[i], ref[i], 1e-4);

  const auto grad_out = random_values(out_size, rng);
  std::vector<float> s_gin(in.size(), 7.0f), p_gin(in.size(), -3.0f);
  k::serial::conv2d_backward_input(g, grad_out, w, s_gin);
  k::parallel::conv2d_backward_input(g, grad_out, w, p_gin);
  EXPECT_EQ(s_gin, p_gin);

  // Backward-input is the adjoint of the linear part of forward:
  // <conv(x), gy> - <b-term, gy> == <x, conv^T(gy)>.
  std::vector<float> zero_b(g.out_channels, 0.0f), lin(out_size);
  k::serial::conv2d_forward(g, in, w, zero_b, lin);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < out_size; ++i) lhs += static_cast<double>(lin[i]) * grad_out[i];
  for (std::size_t i = 0; i < in.size(); ++i) rhs += static_cast<double>(in[i]) * s_gin[i];
  EXPECT_NEAR(lhs, rhs, 1e-3 * (1.0 + std::abs(lhs)));

  std::vector<float> s_gw(w.size(), 0.5f), p_gw(w.size(), 0.5f), s_gb(b.size(), 0.25f), p_gb(b.size(), 0.25f);
  k::serial::conv2d_backward_params(g, in, grad_out, s_gw, s_gb);
  k::parallel::conv2d_backward_params(g, in, grad_out, p_gw, p_gb);
  EXPECT_EQ(s_gw, p_gw);
  EXPECT_EQ(s_gb, p_gb);
  // <w, dL/dw> == <conv(x; w, 0), gy> for a linear-in-w loss.
  double wdot = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) wdot += static_cast<double>(w[i]) * (s_gw[i] - 0.5f);
  EXPECT_NEAR(wdot, lhs, 1e-3 * (1.0 + std::abs(lhs)));
  double gsum = 0.0;
  for (float v : grad_out) gsum += v;
  double bsum = 0.0;
  for (float v : s_gb) bsum += v - 0.25f;
  EXPECT_NEAR(bsum, gsum, 1e-3);
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvKernels,
                         ::testing::Values(ConvCase{1, 1, 5, 5, 1, 3, 1}, ConvCase{2, 3, 7, 6, 4, 3, 1},
                                           ConvCase{3, 2, 4, 4, 5, 1, 0}, ConvCase{2, 2, 6, 5, 3, 5, 2},
                                           ConvCase{1, 4, 5, 5, 2, 3, 0}, ConvCase{4, 8, 8, 8, 16, 3, 1}));

TEST(DenseKernels, SerialMatchesNaiveAndParallelIsBitwiseEqual) {
  std::mt19937_64 rng(3);
  const k::DenseGeometry g{5, 7, 3};
  const auto in = random_values(g.rows * g.in_features, rng);
  const auto w = random_values(g.in_features * g.out_features, rng);
  const auto b = random_values(g.out_features, rng);
  std::vector<float> s(g.rows * g.out_features), p(s.size());
  k::serial::dense_forward(g, in, w, b, s);
  k::parallel::dense_forward(g, in, w, b, p);
  EXPECT_EQ(s, p);
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t o = 0; o < g.out_features; ++o) {
      double ref = b[o];
      for (std::size_t i = 0; i < g.in_features; ++i) ref += static_cast<double>(w[o * g.in_features + i]) * in[r * g.in_features + i];
      EXPECT_NEAR(s[r * g.out_features + o], ref, 1e-5);
    }

  const auto gy = random_values(s.size(), rng);
  std::vector<float> sgi(in.size()), pgi(in.size());
  k::serial::dense_backward_input(g, gy, w, sgi);
  k::parallel::dense_backward_input(g, gy, w, pgi);
  EXPECT_EQ(sgi, pgi);
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t i = 0; i < g.in_features; ++i) {
      double ref = 0.0;
      for (std::size_t o = 0; o < g.out_features; ++o) ref += static_cast<double>(w[o * g.in_features + i]) * gy[r * g.out_features + o];
      EXPECT_NEAR(sgi[r * g.in_features + i], ref, 1e-5);
    }

  std::vector<float> sgw(w.size(), 1.0f), pgw(w.size(), 1.0f), sgb(b.size()), pgb(b.size());
  k::serial::dense_backward_params(g, in, gy, sgw, sgb);
  k::parallel::dense_backward_params(g, in, gy, pgw, pgb);
  EXPECT_EQ(sgw, pgw);
  EXPECT_EQ(sgb, pgb);
  for (std::size_t o = 0; o < g.out_features; ++o)
    for (std::size_t i = 0; i < g.in_features; ++i) {
      double ref = 1.0;
      for (std::size_t r = 0; r < g.rows; ++r) ref += static_cast<double>(in[r * g.in_features + i]) * gy[r * g.out_features + o];
      EXPECT_NEAR(sgw[o * g.in_features + i], ref, 1e-5);
    }
}

TEST(Kernels, RejectMismatchedBuffers) {
  const k::ConvGeometry g{1, 1, 4, 4, 1, 3, 1};
  std::vector<float> in(15), w(9), b(1), out(16);
  EXPECT_THROW(k::serial::conv2d_forward(g, in, w, b, out), ShapeError);
  EXPECT_THROW(k::parallel::conv2d_forward(g, in, w, b, out), ShapeError);
  const k::DenseGeometry d{2, 3, 4};
  std::vector<float> din(6), dw(11), db(4), dout(8);
  EXPECT_THROW(k::serial::dense_forward(d, din, dw, db, dout), ShapeError);
}

TEST(Kernels, ThreadCountIsPositive) { EXPECT_GE(k::max_threads(), 1); }
