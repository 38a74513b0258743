#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "impatient/net.hpp"

namespace impatient {

/// Cumulative per-example cost to obtain each head's prediction, in
/// multiply-accumulate operations.
///
///   t_b[k]  backbone up to attach(k) plus head k only (budget known up
///           front, earlier heads skipped)
///   t_a[k]  backbone up to attach(k) plus heads 1..k (anytime mode, every
///           earlier head evaluated on the way)
///
/// The optional *_ms columns hold measured wall-clock medians per example
/// and are informational only.
struct CostModel {
  std::vector<double> prefix;     // backbone MACs through attach(k)
  std::vector<double> head_cost;  // MACs of head k alone
  std::vector<double> t_b;
  std::vector<double> t_a;
  std::optional<std::vector<double>> t_b_ms;
  std::optional<std::vector<double>> t_a_ms;

  std::size_t num_heads() const { return t_b.size(); }
  /// Strictly increasing t_b and t_a, t_a >= t_b.
  void validate() const;
  /// Columns: head,t_b_macs,t_a_macs,t_b_ms,t_a_ms (ms empty when unmeasured).
  std::string to_csv() const;
};

/// Analytic MAC-count cost model.
CostModel analytic_costs(const ImpatientNet& net);

/// Analytic costs plus measured wall-clock medians over `repeats` timed runs
/// on the calibration batch.
CostModel measure_costs(const ImpatientNet& net, const Tensor& calibration_batch,
                        std::size_t repeats = 5);

struct InferenceResult {
  std::size_t predicted_class = 0;
  /// Zero-based index of the head that produced the prediction.
  std::size_t head = 0;
  /// Cost spent in MACs under the mode's cost model.
  double cost = 0.0;
  /// Probabilities of every head evaluated so far; empty for skipped heads.
  std::vector<std::vector<float>> probabilities;
};

/// Deepest head k with t_b[k] <= budget. Throws ConfigError below t_b[0].
std::size_t head_for_budget(const CostModel& costs, double budget);
/// Latest head k with t_a[k] <= interrupt_at. Throws ConfigError below t_a[0].
std::size_t head_for_interrupt(const CostModel& costs, double interrupt_at);

/// Runs only the backbone prefix and the deepest affordable head.
InferenceResult predict_with_budget(const ImpatientNet& net, const Tensor& example, double budget,
                                    const CostModel& costs);

/// Evaluates heads in order and returns the latest one completed by
/// `interrupt_at` under t_a costing.
InferenceResult predict_anytime(const ImpatientNet& net, const Tensor& example,
                                double interrupt_at, const CostModel& costs);

struct CascadePolicy {
  enum class Criterion { ratio, entropy };

  Criterion criterion = Criterion::ratio;
  /// ratio: stop when top1 / top2 >= threshold. entropy: stop when the
  /// entropy normalized by ln C is <= threshold. May be +infinity.
  double threshold = 2.0;

  void validate() const;
};

std::string to_string(CascadePolicy::Criterion c);
CascadePolicy::Criterion criterion_from_string(const std::string& name);

/// Highest over second-highest probability; +inf when the second is 0.
double ratio_1v2(std::span<const float> probs);
/// Shannon entropy divided by ln C, in [0, 1].
double normalized_entropy(std::span<const float> probs);
bool cascade_stops(const CascadePolicy& policy, std::span<const float> probs);

/// First head whose probabilities satisfy the policy, else the last head.
/// `staged[k]` holds head k's probabilities for one example.
std::size_t cascade_head(const CascadePolicy& policy,
                         const std::vector<std::span<const float>>& staged);

/// Evaluates heads lazily in order under t_a costing and stops at the first
/// head that satisfies the policy (the last head otherwise).
InferenceResult predict_cascade(const ImpatientNet& net, const Tensor& example,
                                const CascadePolicy& policy, const CostModel& costs);

}  // namespace impatient
