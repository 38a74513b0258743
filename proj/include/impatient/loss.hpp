#pragma once

#include <span>

#include "impatient/tensor.hpp"

namespace impatient {

/// Mean cross-entropy over a batch and its gradient w.r.t. the logits.
struct LossValue {
  double loss = 0.0;
  /// Row-wise softmax of the logits (N x C).
  Tensor probabilities;
  /// d loss / d logits = (softmax - one_hot) / N.
  Tensor grad;
};

/// Row-wise softmax of N x C logits.
Tensor softmax(const Tensor& logits);

/// `labels` holds one class index per row of `logits`.
LossValue softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const float> values);

}  // namespace impatient
