#include "impatient/net.hpp"

#include <cmath>
#include <random>

#include "impatient/error.hpp"
#include "impatient/loss.hpp"

namespace impatient {

namespace {

void initialize(Layer& layer, std::mt19937_64& rng) {
  if (auto* conv = dynamic_cast<Conv2D*>(&layer)) conv->initialize(rng);
  if (auto* fc = dynamic_cast<FullyConnected*>(&layer)) fc->initialize(rng);
}

}  // namespace

ImpatientNet ImpatientNet::build(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ImpatientNet net;
  net.arch_ = arch;
  net.shapes_ = arch.activation_shapes();
  std::mt19937_64 rng(seed);

  Shape current = arch.input_shape;
  for (std::size_t i = 0; i < arch.backbone.size(); ++i) {
    auto layer = make_layer(arch.backbone[i], current);
    layer->name = "backbone." + std::to_string(i) + "." + to_string(layer->kind());
    initialize(*layer, rng);
    current = net.shapes_[i];
    net.backbone_.push_back(std::move(layer));
  }

  for (std::size_t k = 0; k < arch.heads.size(); ++k) {
    const HeadSpec& spec = arch.heads[k];
    std::vector<LayerSpec> specs;
    if (spec.kind == HeadKind::avg) specs.push_back({LayerKind::avg_pool_global});
    if (spec.kind == HeadKind::avg4x4) specs.push_back({LayerKind::avg_pool_grid, 0, 3, 1, 4});
    if (arch.head_hidden > 0) {
      specs.push_back({LayerKind::fully_connected, arch.head_hidden});
      specs.push_back({LayerKind::relu});
    }
    specs.push_back({LayerKind::fully_connected, arch.num_classes});

    std::vector<std::unique_ptr<Layer>> layers;
    Shape shape = net.shapes_[spec.attach];
    for (std::size_t j = 0; j < specs.size(); ++j) {
      auto layer = make_layer(specs[j], shape);
      layer->name = "head" + std::to_string(k + 1) + "." + std::to_string(j) + "." +
                    to_string(layer->kind());
      initialize(*layer, rng);
      shape = layer->output_shape(shape);
      layers.push_back(std::move(layer));
    }
    net.heads_.push_back(std::move(layers));
  }
  return net;
}

bool ImpatientNet::has_batchnorm() const {
  for (const auto& l : backbone_) {
    if (l->kind() == LayerKind::batch_norm) return true;
  }
  return false;
}

Tensor ImpatientNet::head_forward(std::size_t head, const Tensor& features, Mode mode) {
  Tensor x = features;
  for (auto& layer : heads_[head]) x = layer->forward(x, mode);
  return x;
}

Tensor ImpatientNet::head_backward(std::size_t head, const Tensor& grad_logits) {
  Tensor g = grad_logits;
  auto& layers = heads_[head];
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Tensor> ImpatientNet::forward_all(const Tensor& batch, Mode mode) {
  std::vector<Tensor> probs;
  probs.reserve(heads_.size());
  Tensor x = batch;
  std::size_t next = 0;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    x = backbone_[i]->forward(x, mode);
    while (next < heads_.size() && arch_.heads[next].attach == i) {
      probs.push_back(softmax(head_forward(next, x, mode)));
      ++next;
    }
  }
  return probs;
}

std::vector<Tensor> ImpatientNet::infer_all(const Tensor& batch) const {
  std::vector<Tensor> probs;
  probs.reserve(heads_.size());
  Tensor x = batch;
  std::size_t next = 0;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    x = backbone_[i]->infer(x);
    while (next < heads_.size() && arch_.heads[next].attach == i) {
      probs.push_back(infer_head(next, x));
      ++next;
    }
  }
  return probs;
}

Tensor ImpatientNet::infer_backbone(const Tensor& input, std::size_t first, std::size_t last) const {
  if (first > last || last >= backbone_.size()) throw ConfigError("backbone range out of bounds");
  Tensor x = input;
  for (std::size_t i = first; i <= last; ++i) x = backbone_[i]->infer(x);
  return x;
}

Tensor ImpatientNet::infer_head_logits(std::size_t head, const Tensor& features) const {
  if (head >= heads_.size()) throw ConfigError("head index out of range");
  Tensor x = features;
  for (const auto& layer : heads_[head]) x = layer->infer(x);
  return x;
}

Tensor ImpatientNet::infer_head(std::size_t head, const Tensor& features) const {
  return softmax(infer_head_logits(head, features));
}

JointLoss ImpatientNet::joint_loss_backward(const Tensor& batch, std::span<const int> labels,
                                            std::span<const double> weights,
                                            double weight_decay) {
  const std::size_t k_count = heads_.size();
  if (weights.size() != k_count) {
    throw ConfigError("got " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(k_count) + " heads");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw ConfigError("head weights must be finite");
  }

  JointLoss result;
  result.weights.assign(weights.begin(), weights.end());
  std::vector<Tensor> grad_logits(k_count);

  Tensor x = batch;
  std::size_t next = 0;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    x = backbone_[i]->forward(x, Mode::train);
    while (next < k_count && arch_.heads[next].attach == i) {
      const LossValue lv = softmax_cross_entropy(head_forward(next, x, Mode::train), labels);
      result.head_losses.push_back(lv.loss);
      result.weighted += weights[next] * lv.loss;
      grad_logits[next] = lv.grad;
      grad_logits[next] *= static_cast<float>(weights[next]);
      ++next;
    }
  }

  // Backward: gradients from every active head attached at layer i join the
  // upstream gradient before layer i is back-propagated.
  Tensor grad;
  bool have_grad = false;
  std::size_t head = k_count;
  for (std::size_t i = backbone_.size(); i-- > 0;) {
    while (head > 0 && arch_.heads[head - 1].attach == i) {
      --head;
      if (weights[head] == 0.0) continue;
      Tensor g = head_backward(head, grad_logits[head]);
      if (have_grad) {
        grad += g;
      } else {
        grad = std::move(g);
        have_grad = true;
      }
    }
    if (have_grad) grad = backbone_[i]->backward(grad);
  }

  if (weight_decay != 0.0) {
    double squares = 0.0;
    const auto decay = [&](Param* p) {
      if (!p->decay) return;
      const float lambda = static_cast<float>(weight_decay);
      for (std::size_t j = 0; j < p->value.size(); ++j) {
        squares += static_cast<double>(p->value[j]) * p->value[j];
        p->grad[j] += lambda * p->value[j];
      }
    };
    for (Param* p : backbone_params()) decay(p);
    for (std::size_t k = 0; k < k_count; ++k) {
      if (weights[k] == 0.0) continue;
      for (Param* p : head_params(k)) decay(p);
    }
    result.regularization = 0.5 * weight_decay * squares;
  }
  result.total = result.weighted + result.regularization;
  if (!std::isfinite(result.total)) throw NumericError("non-finite joint loss");
  return result;
}

void ImpatientNet::zero_grad() {
  for (Param* p : params()) p->grad.zero();
}

std::vector<Param*> ImpatientNet::backbone_params() {
  std::vector<Param*> out;
  for (auto& l : backbone_) {
    for (Param* p : l->params()) out.push_back(p);
  }
  return out;
}

std::vector<Param*> ImpatientNet::head_params(std::size_t head) {
  std::vector<Param*> out;
  for (auto& l : heads_.at(head)) {
    for (Param* p : l->params()) out.push_back(p);
  }
  return out;
}

std::vector<Param*> ImpatientNet::params() {
  std::vector<Param*> out = backbone_params();
  for (std::size_t k = 0; k < heads_.size(); ++k) {
    for (Param* p : head_params(k)) out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> ImpatientNet::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  const auto add_layer = [&](Layer& l) {
    for (Param* p : l.params()) out.emplace_back(l.name + "." + p->name, &p->value);
  };
  for (auto& l : backbone_) add_layer(*l);
  for (auto& head : heads_) {
    for (auto& l : head) add_layer(*l);
  }
  for (auto& l : backbone_) {
    if (auto* bn = dynamic_cast<BatchNorm*>(l.get())) {
      out.emplace_back(l->name + ".running_mean", &bn->running_mean());
      out.emplace_back(l->name + ".running_var", &bn->running_var());
    }
  }
  return out;
}

std::uint64_t ImpatientNet::backbone_layer_macs(std::size_t layer) const {
  const Shape& input = layer == 0 ? arch_.input_shape : shapes_.at(layer - 1);
  return backbone_.at(layer)->macs(input);
}

std::uint64_t ImpatientNet::head_macs(std::size_t head) const {
  Shape shape = shapes_.at(arch_.heads.at(head).attach);
  std::uint64_t total = 0;
  for (const auto& l : heads_.at(head)) {
    total += l->macs(shape);
    shape = l->output_shape(shape);
  }
  return total;
}

}  // namespace impatient
