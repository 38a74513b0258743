#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "impatient/error.hpp"
#include "impatient/loss.hpp"
#include "support.hpp"

using namespace impatient;
using namespace impatient::testing;

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogC) {
  for (std::size_t c : {2u, 5u, 10u}) {
    Tensor logits({3, c}, 0.7f);
    std::vector<int> labels{0, 1, static_cast<int>(c - 1)};
    EXPECT_NEAR(softmax_cross_entropy(logits, labels).loss, std::log(static_cast<double>(c)), 1e-7);
  }
}

TEST(SoftmaxCrossEntropy, ConfidentCorrectLogit) {
  // -ln(sigmoid(20)) = ln(1 + e^-20)
  Tensor logits({1, 2}, std::vector<float>{10.0f, -10.0f});
  std::vector<int> labels{0};
  const double expected = std::log1p(std::exp(-20.0));
  EXPECT_NEAR(expected, 2.061153622e-9, 1e-17);
  EXPECT_NEAR(softmax_cross_entropy(logits, labels).loss, expected, 1e-15);
}

TEST(SoftmaxCrossEntropy, GradientIsSoftmaxMinusOneHotOverN) {
  Tensor logits({2, 3}, std::vector<float>{1, 2, 3, 0, 0, 0});
  std::vector<int> labels{2, 0};
  const auto v = softmax_cross_entropy(logits, labels);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(v.grad[0], std::exp(1.0) / z / 2.0, 1e-7);
  EXPECT_NEAR(v.grad[2], (std::exp(3.0) / z - 1.0) / 2.0, 1e-7);
  EXPECT_NEAR(v.grad[3], (1.0 / 3.0 - 1.0) / 2.0, 1e-7);
  EXPECT_NEAR(v.probabilities[4], 1.0 / 3.0, 1e-7);
}

TEST(SoftmaxCrossEntropy, FiniteDifferenceCheck) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = random_tensor({4, 6}, rng, -3.0f, 3.0f);
    std::vector<int> labels{0, 5, 2, 3};
    const auto v = softmax_cross_entropy(logits, labels);
    const auto loss = [&] { return softmax_cross_entropy(logits, labels).loss; };
    EXPECT_LE(finite_difference_error(loss, logits.values(), v.grad.values()), 1e-4) << trial;
  }
}

TEST(SoftmaxCrossEntropy, LargeLogitsStayFinite) {
  Tensor logits({1, 3}, std::vector<float>{1000.0f, -1000.0f, 0.0f});
  std::vector<int> labels{1};
  const auto v = softmax_cross_entropy(logits, labels);
  EXPECT_NEAR(v.loss, 2000.0, 1e-6);
  EXPECT_TRUE(v.grad.all_finite());
}

TEST(SoftmaxCrossEntropy, Errors) {
  Tensor logits({2, 3});
  std::vector<int> short_labels{0};
  EXPECT_THROW(softmax_cross_entropy(logits, short_labels), ShapeError);
  std::vector<int> bad{0, 3};
  EXPECT_THROW(softmax_cross_entropy(logits, bad), ConfigError);
  std::vector<int> negative{0, -1};
  EXPECT_THROW(softmax_cross_entropy(logits, negative), ConfigError);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(12);
  Tensor logits = random_tensor({5, 7}, rng, -10.0f, 10.0f);
  Tensor p = softmax(logits);
  Tensor shifted = logits;
  for (auto& v : shifted.values()) v += 3.0f;
  Tensor q = softmax(shifted);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      s += p[r * 7 + c];
      EXPECT_NEAR(p[r * 7 + c], q[r * 7 + c], 1e-6);
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Argmax, TiesResolveToLowestIndex) {
  std::vector<float> v{0.2f, 0.4f, 0.4f, 0.1f};
  EXPECT_EQ(argmax(v), 1u);
  std::vector<float> flat{1.0f, 1.0f, 1.0f};
  EXPECT_EQ(argmax(flat), 0u);
}
