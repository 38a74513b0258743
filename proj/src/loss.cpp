#include "impatient/loss.hpp"

#include <algorithm>
#include <cmath>

#include "impatient/error.hpp"

namespace impatient {

namespace {

void require_logits(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("logits must be N x C, got " + shape_string(logits.shape()));
  }
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  require_logits(logits);
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  Tensor probs(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const float* z = logits.data() + r * c;
    float* p = probs.data() + r * c;
    const float top = *std::max_element(z, z + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(static_cast<double>(z[j] - top));
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = static_cast<float>(std::exp(static_cast<double>(z[j] - top)) / total);
    }
  }
  return probs;
}

LossValue softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_logits(logits);
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("got " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                     " logit rows");
  }
  LossValue result;
  result.probabilities = softmax(logits);
  result.grad = result.probabilities;
  const float inv_n = 1.0f / static_cast<float>(n);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw ConfigError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(c) + " classes");
    }
    const float* z = logits.data() + r * c;
    const std::size_t top = argmax(std::span<const float>(z, c));
    // log-sum-exp written as log1p of the non-maximal terms, which keeps
    // tiny losses like -log sigmoid(20) representable.
    double tail = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j != top) tail += std::exp(static_cast<double>(z[j]) - z[top]);
    }
    total += std::log1p(tail) + (static_cast<double>(z[top]) - z[label]);
    float* g = result.grad.data() + r * c;
    g[label] -= 1.0f;
    for (std::size_t j = 0; j < c; ++j) g[j] *= inv_n;
  }
  result.loss = total / static_cast<double>(n);
  if (!std::isfinite(result.loss)) throw NumericError("non-finite cross-entropy loss");
  return result;
}

std::size_t argmax(std::span<const float> values) {
  if (values.empty()) throw ShapeError("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace impatient
