#include "impatient/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "impatient/loss.hpp"

namespace impatient {

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs == 0) throw ConfigError("need at least one epoch");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (batchnorm && batch_size < 2) throw ConfigError("batch norm needs batch size >= 2");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be nonnegative");
}

std::string TrainLog::to_csv(std::size_t heads) const {
  std::string out = "epoch,total_loss";
  for (std::size_t k = 1; k <= heads; ++k) out += ",loss_head_" + std::to_string(k);
  for (std::size_t k = 1; k <= heads; ++k) out += ",val_acc_head_" + std::to_string(k);
  out += '\n';
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + fixed(e.total_loss);
    for (double l : e.head_losses) out += "," + fixed(l);
    for (double a : e.val_accuracy) out += "," + fixed(a);
    out += '\n';
  }
  return out;
}

SgdMomentum::SgdMomentum(std::vector<Param*> params, double learning_rate, double momentum)
    : params_(std::move(params)),
      rate_(static_cast<float>(learning_rate)),
      momentum_(static_cast<float>(momentum)) {
  for (Param* p : params_) velocity_.emplace_back(p->value.shape());
}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    Tensor& v = velocity_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      v[j] = momentum_ * v[j] + p.grad[j];
      p.value[j] -= rate_ * v[j];
    }
  }
}

std::vector<double> validate(const ImpatientNet& net, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw ConfigError("validation set is empty");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> correct(net.num_heads(), 0);
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - begin);
    const auto probs = net.infer_all(data.images.slice_batch(begin, count));
    for (std::size_t k = 0; k < probs.size(); ++k) {
      const std::size_t c = probs[k].dim(1);
      for (std::size_t i = 0; i < count; ++i) {
        const auto row = std::span<const float>(probs[k].data() + i * c, c);
        if (static_cast<int>(argmax(row)) == data.labels[begin + i]) ++correct[k];
      }
    }
  }
  std::vector<double> acc;
  for (auto c : correct) acc.push_back(static_cast<double>(c) / static_cast<double>(data.size()));
  return acc;
}

TrainLog train(ImpatientNet& net, const Dataset& train_set, const Dataset& val_set,
               const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.batchnorm != net.has_batchnorm()) {
    throw ConfigError("train config batchnorm flag disagrees with the network architecture");
  }
  if (train_set.size() < 2) throw ConfigError("training set needs at least two examples");
  if (val_set.size() == 0) throw ConfigError("validation set is empty");

  WeightScheme scheme = cfg.scheme;
  if (scheme.kind != SchemeKind::from_density) scheme.heads = net.num_heads();
  const std::vector<double> weights = scheme_weights(scheme);
  if (weights.size() != net.num_heads()) {
    throw ConfigError("weighting scheme has " + std::to_string(weights.size()) +
                      " weights for a " + std::to_string(net.num_heads()) + "-head network");
  }

  const std::size_t k_count = net.num_heads();
  SgdMomentum optimizer(net.params(), cfg.learning_rate, cfg.momentum);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainLog log;
  double initial_loss = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord record;
    record.epoch = epoch;
    record.head_losses.assign(k_count, 0.0);
    std::size_t batches = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
      if (count < 2) continue;
      const auto rows = std::span<const std::size_t>(order).subspan(begin, count);
      const Tensor batch = train_set.images.gather_batch(rows);
      std::vector<int> labels;
      labels.reserve(count);
      for (auto r : rows) labels.push_back(train_set.labels[r]);

      net.zero_grad();
      JointLoss loss;
      try {
        loss = net.joint_loss_backward(batch, labels, weights, cfg.weight_decay);
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": " +
                                  e.what(),
                              log, epoch);
      }
      if (initial_loss < 0.0) initial_loss = loss.total;
      if (loss.total > cfg.divergence_factor * initial_loss) {
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": loss " +
                                  fixed(loss.total) + " exceeds " + fixed(cfg.divergence_factor) +
                                  " x initial loss " + fixed(initial_loss),
                              log, epoch);
      }
      optimizer.step();

      record.total_loss += loss.total;
      for (std::size_t k = 0; k < k_count; ++k) record.head_losses[k] += loss.head_losses[k];
      ++batches;
    }
    if (batches == 0) throw ConfigError("no training batch with at least two examples");
    record.total_loss /= static_cast<double>(batches);
    for (auto& l : record.head_losses) l /= static_cast<double>(batches);
    try {
      record.val_accuracy = validate(net, val_set);
    } catch (const NumericError& e) {
      throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what(),
                            log, epoch);
    }
    log.epochs.push_back(std::move(record));
  }
  return log;
}

}  // namespace impatient
