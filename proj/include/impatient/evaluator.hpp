#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "impatient/budget.hpp"
#include "impatient/data.hpp"
#include "impatient/inference.hpp"
#include "impatient/net.hpp"

namespace impatient {

/// Eval-mode probabilities of every head for a whole dataset.
struct StagedOutputs {
  std::vector<Tensor> probs;  // one N x C tensor per head
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t num_heads() const { return probs.size(); }
  std::span<const float> at(std::size_t head, std::size_t example) const;
  std::vector<std::span<const float>> example(std::size_t i) const;
};

StagedOutputs evaluate_staged(const ImpatientNet& net, const Dataset& data,
                              std::size_t batch_size = 256);

std::vector<double> head_accuracies(const StagedOutputs& staged);

struct ExpectedAccuracyReport {
  std::string scheme;
  std::vector<double> head_accuracy;
  std::vector<double> weights;
  double expected = 0.0;
};

/// sum_k w_k a_k with the scheme's normalized weights.
ExpectedAccuracyReport expected_accuracy(std::span<const double> head_accuracy,
                                         const WeightScheme& scheme);
ExpectedAccuracyReport expected_accuracy(const ImpatientNet& net, const Dataset& test_set,
                                         const WeightScheme& scheme);

/// Columns: scheme,expected_accuracy,acc_head_1..K,w_1..w_K
std::string reports_to_csv(const std::vector<ExpectedAccuracyReport>& reports);
/// Human-readable key/value summary.
std::string reports_summary(const std::vector<ExpectedAccuracyReport>& reports);

struct CurvePoint {
  double cost = 0.0;  // mean MACs per example
  std::optional<double> cost_ms;
  double accuracy = 0.0;
  /// Head number (1-based) for per-head curves, threshold for sweeps.
  double parameter = 0.0;
};

struct TimeAccuracyCurve {
  enum class Source { per_head, cascade_sweep };

  Source source = Source::per_head;
  std::string label;
  std::vector<CurvePoint> points;

  /// Columns: cost_macs,cost_ms,accuracy,threshold_or_head
  std::string to_csv() const;
};

/// One point per head: (t_a[k], a_k).
TimeAccuracyCurve per_head_curve(const StagedOutputs& staged, const CostModel& costs);

/// One point per threshold: mean t_a cost and accuracy of the cascade.
/// Thresholds must be nonempty and ascending.
TimeAccuracyCurve cascade_sweep(const StagedOutputs& staged, CascadePolicy::Criterion criterion,
                                std::span<const double> thresholds, const CostModel& costs);

}  // namespace impatient
