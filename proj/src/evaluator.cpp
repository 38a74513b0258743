#include "impatient/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "impatient/error.hpp"
#include "impatient/loss.hpp"

namespace impatient {

namespace {

std::string num(double v, const char* fmt = "%.6f") {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

}  // namespace

std::span<const float> StagedOutputs::at(std::size_t head, std::size_t example) const {
  const Tensor& p = probs.at(head);
  const std::size_t c = p.dim(1);
  return {p.data() + example * c, c};
}

std::vector<std::span<const float>> StagedOutputs::example(std::size_t i) const {
  std::vector<std::span<const float>> out;
  for (std::size_t k = 0; k < probs.size(); ++k) out.push_back(at(k, i));
  return out;
}

StagedOutputs evaluate_staged(const ImpatientNet& net, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw ConfigError("evaluation set is empty");
  StagedOutputs out;
  out.labels = data.labels;
  const std::size_t c = net.num_classes();
  std::vector<std::vector<float>> rows(net.num_heads());
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - begin);
    const auto probs = net.infer_all(data.images.slice_batch(begin, count));
    for (std::size_t k = 0; k < probs.size(); ++k) {
      rows[k].insert(rows[k].end(), probs[k].values().begin(), probs[k].values().end());
    }
  }
  for (auto& r : rows) out.probs.emplace_back(Shape{data.size(), c}, std::move(r));
  return out;
}

std::vector<double> head_accuracies(const StagedOutputs& staged) {
  if (staged.size() == 0) throw ConfigError("evaluation set is empty");
  std::vector<double> acc;
  for (std::size_t k = 0; k < staged.num_heads(); ++k) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < staged.size(); ++i) {
      if (static_cast<int>(argmax(staged.at(k, i))) == staged.labels[i]) ++correct;
    }
    acc.push_back(static_cast<double>(correct) / static_cast<double>(staged.size()));
  }
  return acc;
}

ExpectedAccuracyReport expected_accuracy(std::span<const double> head_accuracy,
                                         const WeightScheme& scheme) {
  WeightScheme s = scheme;
  if (s.kind != SchemeKind::from_density) s.heads = head_accuracy.size();
  ExpectedAccuracyReport r;
  r.scheme = s.name();
  r.head_accuracy.assign(head_accuracy.begin(), head_accuracy.end());
  r.weights = scheme_weights(s);
  if (r.weights.size() != head_accuracy.size()) {
    throw ConfigError("scheme weights do not match the number of heads");
  }
  for (std::size_t k = 0; k < r.weights.size(); ++k) r.expected += r.weights[k] * head_accuracy[k];
  return r;
}

ExpectedAccuracyReport expected_accuracy(const ImpatientNet& net, const Dataset& test_set,
                                         const WeightScheme& scheme) {
  const auto acc = head_accuracies(evaluate_staged(net, test_set));
  return expected_accuracy(acc, scheme);
}

std::string reports_to_csv(const std::vector<ExpectedAccuracyReport>& reports) {
  const std::size_t k_count = reports.empty() ? 0 : reports.front().head_accuracy.size();
  std::string out = "scheme,expected_accuracy";
  for (std::size_t k = 1; k <= k_count; ++k) out += ",acc_head_" + std::to_string(k);
  for (std::size_t k = 1; k <= k_count; ++k) out += ",w_" + std::to_string(k);
  out += '\n';
  for (const auto& r : reports) {
    out += r.scheme + "," + num(r.expected);
    for (double a : r.head_accuracy) out += "," + num(a);
    for (double w : r.weights) out += "," + num(w, "%.9f");
    out += '\n';
  }
  return out;
}

std::string reports_summary(const std::vector<ExpectedAccuracyReport>& reports) {
  std::string out;
  if (!reports.empty()) {
    out += "heads: " + std::to_string(reports.front().head_accuracy.size()) + "\n";
    out += "head_accuracy:";
    for (double a : reports.front().head_accuracy) out += " " + num(a * 100.0, "%.2f");
    out += "\n";
  }
  for (const auto& r : reports) out += "expected_accuracy." + r.scheme + ": " + num(r.expected * 100.0, "%.2f") + "\n";
  return out;
}

std::string TimeAccuracyCurve::to_csv() const {
  std::string out = "cost_macs,cost_ms,accuracy,threshold_or_head\n";
  for (const auto& p : points) {
    out += num(p.cost, "%.3f") + ",";
    if (p.cost_ms) out += num(*p.cost_ms);
    out += "," + num(p.accuracy) + ",";
    out += source == Source::per_head ? num(p.parameter, "%.0f") : num(p.parameter, "%.6g");
    out += '\n';
  }
  return out;
}

TimeAccuracyCurve per_head_curve(const StagedOutputs& staged, const CostModel& costs) {
  if (staged.num_heads() != costs.num_heads()) {
    throw ConfigError("cost model and outputs disagree on the number of heads");
  }
  const auto acc = head_accuracies(staged);
  TimeAccuracyCurve curve;
  curve.source = TimeAccuracyCurve::Source::per_head;
  curve.label = "per_head";
  for (std::size_t k = 0; k < acc.size(); ++k) {
    CurvePoint p;
    p.cost = costs.t_a[k];
    if (costs.t_a_ms) p.cost_ms = (*costs.t_a_ms)[k];
    p.accuracy = acc[k];
    p.parameter = static_cast<double>(k + 1);
    curve.points.push_back(p);
  }
  return curve;
}

TimeAccuracyCurve cascade_sweep(const StagedOutputs& staged, CascadePolicy::Criterion criterion,
                                std::span<const double> thresholds, const CostModel& costs) {
  if (thresholds.empty()) throw ConfigError("cascade sweep needs at least one threshold");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw ConfigError("cascade thresholds must be ascending");
  }
  if (staged.size() == 0) throw ConfigError("evaluation set is empty");
  if (staged.num_heads() != costs.num_heads()) {
    throw ConfigError("cost model and outputs disagree on the number of heads");
  }
  TimeAccuracyCurve curve;
  curve.source = TimeAccuracyCurve::Source::cascade_sweep;
  curve.label = to_string(criterion);
  const double n = static_cast<double>(staged.size());
  for (double threshold : thresholds) {
    const CascadePolicy policy{criterion, threshold};
    policy.validate();
    // Sum per-head counts, then costs, so the limits match the per-head
    // curve exactly.
    std::vector<std::size_t> stops(staged.num_heads(), 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < staged.size(); ++i) {
      const auto probs = staged.example(i);
      const std::size_t k = cascade_head(policy, probs);
      ++stops[k];
      if (static_cast<int>(argmax(probs[k])) == staged.labels[i]) ++correct;
    }
    CurvePoint p;
    double cost = 0.0, cost_ms = 0.0;
    for (std::size_t k = 0; k < stops.size(); ++k) {
      const double share = static_cast<double>(stops[k]) / n;
      cost += share * costs.t_a[k];
      if (costs.t_a_ms) cost_ms += share * (*costs.t_a_ms)[k];
    }
    p.cost = cost;
    if (costs.t_a_ms) p.cost_ms = cost_ms;
    p.accuracy = static_cast<double>(correct) / n;
    p.parameter = threshold;
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace impatient
