#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "impatient/budget.hpp"
#include "impatient/data.hpp"
#include "impatient/error.hpp"
#include "impatient/net.hpp"

namespace impatient {

struct TrainConfig {
  static constexpr double kRateWithBatchNorm = 0.04;
  static constexpr double kRateWithoutBatchNorm = 5e-3;
  /// Batch norm tolerates rates this many times the plain-net rate.
  static constexpr double kBatchNormRateGap = 100.0;

  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = kRateWithBatchNorm;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
  /// Named schemes are re-sized to the network's head count.
  WeightScheme scheme = WeightScheme::named(SchemeKind::eq, 1);
  /// Must match whether the network contains batch-norm layers.
  bool batchnorm = true;
  /// Abort when the batch loss exceeds this multiple of the first batch loss.
  double divergence_factor = 1e3;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double total_loss = 0.0;
  std::vector<double> head_losses;
  std::vector<double> val_accuracy;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  /// Header: epoch,total_loss,loss_head_1..K,val_acc_head_1..K
  std::string to_csv(std::size_t heads) const;
};

/// Raised when the loss becomes non-finite or explodes; carries the log of
/// the completed epochs.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, TrainLog log, std::size_t epoch)
      : Error(what), log_(std::move(log)), epoch_(epoch) {}
  const TrainLog& log() const { return log_; }
  std::size_t epoch() const { return epoch_; }

 private:
  TrainLog log_;
  std::size_t epoch_;
};

/// SGD with classical momentum: v <- momentum * v + g, p <- p - rate * v.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Param*> params, double learning_rate, double momentum);
  void step();
  const std::vector<Tensor>& velocity() const { return velocity_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> velocity_;
  float rate_, momentum_;
};

/// Mini-batch training of the weighted joint objective. Batches are drawn
/// from a seeded shuffle; a trailing batch with fewer than two examples is
/// skipped. Validation accuracy per head is recorded after each epoch.
TrainLog train(ImpatientNet& net, const Dataset& train_set, const Dataset& val_set,
               const TrainConfig& cfg);

/// Eval-mode accuracy of every head (argmax, ties to the lowest class).
std::vector<double> validate(const ImpatientNet& net, const Dataset& data,
                             std::size_t batch_size = 256);

}  // namespace impatient
