#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "impatient/architecture.hpp"
#include "impatient/layers.hpp"
#include "impatient/tensor.hpp"

namespace impatient {

/// Weighted joint objective sum_k w_k L_k + regularization.
struct JointLoss {
  std::vector<double> head_losses;  // mean cross-entropy per head
  std::vector<double> weights;
  double weighted = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

/// A backbone with K early-prediction heads. Head k reads the activation
/// after backbone layer `attach(k)`, so it depends only on the backbone
/// prefix up to that point plus its own parameters.
///
/// One writer at a time: forward/backward/updates must not run concurrently
/// on the same instance. The const `infer*` methods keep no state and may be
/// called concurrently.
class ImpatientNet {
 public:
  /// Validates the architecture and initializes all parameters from `seed`.
  static ImpatientNet build(const Architecture& arch, std::uint64_t seed);

  ImpatientNet(ImpatientNet&&) noexcept = default;
  ImpatientNet& operator=(ImpatientNet&&) noexcept = default;

  const Architecture& architecture() const { return arch_; }
  std::size_t num_heads() const { return heads_.size(); }
  std::size_t num_classes() const { return arch_.num_classes; }
  std::size_t num_backbone_layers() const { return backbone_.size(); }
  std::size_t attach(std::size_t head) const { return arch_.heads.at(head).attach; }
  bool has_batchnorm() const;

  /// Class probabilities of every head (each N x C). The backbone prefix is
  /// computed once and shared by all heads. Train mode caches activations
  /// for backward.
  std::vector<Tensor> forward_all(const Tensor& batch, Mode mode);

  /// Eval-mode softmax probabilities of every head, without caching.
  std::vector<Tensor> infer_all(const Tensor& batch) const;

  /// Eval-mode backbone layers [first, last] applied to `input`.
  Tensor infer_backbone(const Tensor& input, std::size_t first, std::size_t last) const;
  /// Eval-mode logits of head k on the activation after attach(k).
  Tensor infer_head_logits(std::size_t head, const Tensor& features) const;
  Tensor infer_head(std::size_t head, const Tensor& features) const;

  /// Train-mode forward of all heads followed by backward of
  /// sum_k weights[k] * L_k + (weight_decay / 2) * ||W||^2. Gradients are
  /// accumulated (call zero_grad first). Heads with zero weight are not
  /// back-propagated and their parameters are excluded from the decay term.
  JointLoss joint_loss_backward(const Tensor& batch, std::span<const int> labels,
                                std::span<const double> weights, double weight_decay = 0.0);

  void zero_grad();

  std::vector<Param*> params();
  std::vector<Param*> backbone_params();
  std::vector<Param*> head_params(std::size_t head);

  /// Every checkpointed tensor (parameters, then BN running statistics) with
  /// a stable name.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();

  /// Per-example multiply-accumulate counts.
  std::uint64_t backbone_layer_macs(std::size_t layer) const;
  std::uint64_t head_macs(std::size_t head) const;

  Layer& backbone_layer(std::size_t i) { return *backbone_.at(i); }
  std::vector<std::unique_ptr<Layer>>& head_layers(std::size_t head) { return heads_.at(head); }

 private:
  ImpatientNet() = default;

  Tensor head_forward(std::size_t head, const Tensor& features, Mode mode);
  Tensor head_backward(std::size_t head, const Tensor& grad_logits);

  Architecture arch_;
  std::vector<std::unique_ptr<Layer>> backbone_;
  std::vector<std::vector<std::unique_ptr<Layer>>> heads_;
  std::vector<Shape> shapes_;
};

}  // namespace impatient
