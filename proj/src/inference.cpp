#include "impatient/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "impatient/error.hpp"
#include "impatient/loss.hpp"

namespace impatient {

namespace {

Tensor as_batch(const Tensor& example, const ImpatientNet& net) {
  const Shape& in = net.architecture().input_shape;
  if (example.shape() == in) {
    Shape s = in;
    s.insert(s.begin(), 1);
    return example.reshaped(s);
  }
  if (example.rank() == in.size() + 1 && example.batch() == 1 && example.example_shape() == in) {
    return example;
  }
  throw ShapeError("expected one example of shape " + shape_string(in) + ", got " +
                   shape_string(example.shape()));
}

std::vector<float> row0(const Tensor& probs) {
  return std::vector<float>(probs.data(), probs.data() + probs.dim(1));
}

// Stateless walk through the backbone that evaluates heads on demand.
class StagedRunner {
 public:
  StagedRunner(const ImpatientNet& net, Tensor input) : net_(net), x_(std::move(input)) {}

  std::vector<float> head(std::size_t k) {
    const std::size_t target = net_.attach(k);
    if (next_layer_ <= target) {
      x_ = net_.infer_backbone(x_, next_layer_, target);
      next_layer_ = target + 1;
    }
    return row0(net_.infer_head(k, x_));
  }

 private:
  const ImpatientNet& net_;
  Tensor x_;
  std::size_t next_layer_ = 0;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Costs

void CostModel::validate() const {
  const std::size_t k_count = t_b.size();
  if (k_count == 0 || t_a.size() != k_count) throw ConfigError("cost model needs one entry per head");
  for (std::size_t k = 0; k < k_count; ++k) {
    if (!(t_b[k] > 0.0)) throw ConfigError("head costs must be positive");
    if (t_a[k] < t_b[k]) throw ConfigError("t_a must not be below t_b");
    if (k > 0 && !(t_b[k] > t_b[k - 1] && t_a[k] > t_a[k - 1])) {
      throw ConfigError("head costs must be strictly increasing; head " + std::to_string(k + 1) +
                        " is not more expensive than head " + std::to_string(k));
    }
  }
}

std::string CostModel::to_csv() const {
  std::string out = "head,t_b_macs,t_a_macs,t_b_ms,t_a_ms\n";
  char buf[160];
  for (std::size_t k = 0; k < t_b.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%zu,%.0f,%.0f,", k + 1, t_b[k], t_a[k]);
    out += buf;
    if (t_b_ms && t_a_ms) {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f", (*t_b_ms)[k], (*t_a_ms)[k]);
      out += buf;
    } else {
      out += ",";
    }
    out += '\n';
  }
  return out;
}

CostModel analytic_costs(const ImpatientNet& net) {
  CostModel m;
  double prefix = 0.0, heads_so_far = 0.0;
  std::size_t layer = 0;
  for (std::size_t k = 0; k < net.num_heads(); ++k) {
    for (; layer <= net.attach(k); ++layer) prefix += static_cast<double>(net.backbone_layer_macs(layer));
    const double head = static_cast<double>(net.head_macs(k));
    heads_so_far += head;
    m.prefix.push_back(prefix);
    m.head_cost.push_back(head);
    m.t_b.push_back(prefix + head);
    m.t_a.push_back(prefix + heads_so_far);
  }
  m.validate();
  return m;
}

CostModel measure_costs(const ImpatientNet& net, const Tensor& calibration_batch,
                        std::size_t repeats) {
  if (calibration_batch.rank() < 2 || calibration_batch.batch() == 0) {
    throw ConfigError("calibration batch is empty");
  }
  if (repeats == 0) throw ConfigError("need at least one timing repeat");
  CostModel m = analytic_costs(net);
  const std::size_t k_count = net.num_heads();
  const double per_example = 1.0 / static_cast<double>(calibration_batch.batch());
  using Clock = std::chrono::steady_clock;

  // Time each backbone segment between attach points and each head.
  std::vector<std::vector<double>> segment_ms(k_count), head_ms(k_count);
  for (std::size_t r = 0; r < repeats; ++r) {
    Tensor x = calibration_batch;
    std::size_t first = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      auto t0 = Clock::now();
      x = net.infer_backbone(x, first, net.attach(k));
      auto t1 = Clock::now();
      net.infer_head(k, x);
      auto t2 = Clock::now();
      first = net.attach(k) + 1;
      segment_ms[k].push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() * per_example);
      head_ms[k].push_back(std::chrono::duration<double, std::milli>(t2 - t1).count() * per_example);
    }
  }
  std::vector<double> t_b_ms, t_a_ms;
  double prefix = 0.0, heads = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    prefix += median(segment_ms[k]);
    const double h = median(head_ms[k]);
    heads += h;
    t_b_ms.push_back(prefix + h);
    t_a_ms.push_back(prefix + heads);
  }
  m.t_b_ms = std::move(t_b_ms);
  m.t_a_ms = std::move(t_a_ms);
  return m;
}

// ---------------------------------------------------------------------------
// Budgeted and anytime prediction

std::size_t head_for_budget(const CostModel& costs, double budget) {
  if (std::isnan(budget) || budget < costs.t_b.front()) {
    throw ConfigError("budget below the cost of the first head; no head is affordable");
  }
  const auto it = std::upper_bound(costs.t_b.begin(), costs.t_b.end(), budget);
  return static_cast<std::size_t>(it - costs.t_b.begin()) - 1;
}

std::size_t head_for_interrupt(const CostModel& costs, double interrupt_at) {
  if (std::isnan(interrupt_at) || interrupt_at < costs.t_a.front()) {
    throw ConfigError("interrupted before the first head completed; no prediction available");
  }
  const auto it = std::upper_bound(costs.t_a.begin(), costs.t_a.end(), interrupt_at);
  return static_cast<std::size_t>(it - costs.t_a.begin()) - 1;
}

InferenceResult predict_with_budget(const ImpatientNet& net, const Tensor& example, double budget,
                                    const CostModel& costs) {
  const std::size_t k = head_for_budget(costs, budget);
  const Tensor features = net.infer_backbone(as_batch(example, net), 0, net.attach(k));
  InferenceResult r;
  r.head = k;
  r.cost = costs.t_b[k];
  r.probabilities.resize(net.num_heads());
  r.probabilities[k] = row0(net.infer_head(k, features));
  r.predicted_class = argmax(r.probabilities[k]);
  return r;
}

InferenceResult predict_anytime(const ImpatientNet& net, const Tensor& example,
                                double interrupt_at, const CostModel& costs) {
  const std::size_t last = head_for_interrupt(costs, interrupt_at);
  StagedRunner runner(net, as_batch(example, net));
  InferenceResult r;
  r.probabilities.resize(net.num_heads());
  for (std::size_t k = 0; k <= last; ++k) r.probabilities[k] = runner.head(k);
  r.head = last;
  r.cost = costs.t_a[last];
  r.predicted_class = argmax(r.probabilities[last]);
  return r;
}

// ---------------------------------------------------------------------------
// Cascade

void CascadePolicy::validate() const {
  if (std::isnan(threshold)) throw ConfigError("cascade threshold is NaN");
  if (criterion == Criterion::ratio && !(threshold > 0.0)) {
    throw ConfigError("ratio threshold must be positive");
  }
  if (criterion == Criterion::entropy && !(threshold >= 0.0)) {
    throw ConfigError("entropy threshold must be nonnegative");
  }
}

std::string to_string(CascadePolicy::Criterion c) {
  return c == CascadePolicy::Criterion::ratio ? "ratio" : "entropy";
}

CascadePolicy::Criterion criterion_from_string(const std::string& name) {
  if (name == "ratio" || name == "1v2") return CascadePolicy::Criterion::ratio;
  if (name == "entropy") return CascadePolicy::Criterion::entropy;
  throw ConfigError("unknown cascade criterion '" + name + "'");
}

double ratio_1v2(std::span<const float> probs) {
  if (probs.size() < 2) throw ShapeError("1-vs-2 ratio needs at least two classes");
  float first = -1.0f, second = -1.0f;
  for (float p : probs) {
    if (p > first) {
      second = first;
      first = p;
    } else if (p > second) {
      second = p;
    }
  }
  if (second <= 0.0f) return std::numeric_limits<double>::infinity();
  return static_cast<double>(first) / static_cast<double>(second);
}

double normalized_entropy(std::span<const float> probs) {
  if (probs.size() < 2) throw ShapeError("entropy needs at least two classes");
  double h = 0.0;
  for (float p : probs) {
    if (p > 0.0f) h -= static_cast<double>(p) * std::log(static_cast<double>(p));
  }
  return h / std::log(static_cast<double>(probs.size()));
}

bool cascade_stops(const CascadePolicy& policy, std::span<const float> probs) {
  if (policy.criterion == CascadePolicy::Criterion::ratio) {
    return ratio_1v2(probs) >= policy.threshold;
  }
  return normalized_entropy(probs) <= policy.threshold;
}

std::size_t cascade_head(const CascadePolicy& policy,
                         const std::vector<std::span<const float>>& staged) {
  if (staged.empty()) throw ConfigError("cascade needs at least one head");
  for (std::size_t k = 0; k + 1 < staged.size(); ++k) {
    if (cascade_stops(policy, staged[k])) return k;
  }
  return staged.size() - 1;
}

InferenceResult predict_cascade(const ImpatientNet& net, const Tensor& example,
                                const CascadePolicy& policy, const CostModel& costs) {
  policy.validate();
  StagedRunner runner(net, as_batch(example, net));
  InferenceResult r;
  r.probabilities.resize(net.num_heads());
  const std::size_t k_count = net.num_heads();
  for (std::size_t k = 0; k < k_count; ++k) {
    r.probabilities[k] = runner.head(k);
    r.head = k;
    if (k + 1 < k_count && cascade_stops(policy, r.probabilities[k])) break;
  }
  r.cost = costs.t_a[r.head];
  r.predicted_class = argmax(r.probabilities[r.head]);
  return r;
}

}  // namespace impatient
