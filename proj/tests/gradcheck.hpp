#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "impatient/architecture.hpp"
#include "impatient/layers.hpp"
#include "impatient/net.hpp"
#include "support.hpp"

// Finite-difference cases shared by the unit and acceptance suites.
namespace impatient::testing {

constexpr int kTrials = 20;
constexpr double kTolerance = 1e-3;

struct LayerCase {
  std::string label;
  std::function<std::unique_ptr<Layer>()> make;
  Shape input;  // batched
  // Keeps inputs away from ReLU kinks and max-pool ties.
  std::function<void(Tensor&, std::mt19937_64&)> shape_input;
};

inline void PrintTo(const LayerCase& c, std::ostream* os) { *os << c.label; }

inline void away_from_zero(Tensor& x, std::mt19937_64&) {
  for (auto& v : x.values()) {
    if (std::abs(v) < 0.05f) v = v < 0 ? -0.05f - std::abs(v) : 0.05f + v;
  }
}

// Distinct values spaced well above the difference step.
inline void distinct_values(Tensor& x, std::mt19937_64& rng) {
  std::vector<float> grid(x.size());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.02f * static_cast<float>(i) - 0.5f;
  std::shuffle(grid.begin(), grid.end(), rng);
  for (std::size_t i = 0; i < grid.size(); ++i) x[i] = grid[i];
}

// Max norm-wise relative error over input and parameter gradients for one
// random trial in the given mode.
inline double trial_error(const LayerCase& c, std::uint64_t seed, Mode mode) {
  std::mt19937_64 rng(seed);
  auto layer = c.make();
  for (Param* p : layer->params()) randomize(p->value, rng, -1.0f, 1.0f);
  if (auto* bn = dynamic_cast<BatchNorm*>(layer.get())) {
    randomize(bn->running_mean(), rng, -0.5f, 0.5f);
    randomize(bn->running_var(), rng, 0.5f, 2.0f);
  }
  Tensor x = random_tensor(c.input, rng);
  if (c.shape_input) c.shape_input(x, rng);
  Shape out_shape = layer->output_shape(x.example_shape());
  out_shape.insert(out_shape.begin(), x.batch());
  const Tensor r = random_tensor(out_shape, rng);

  layer->zero_grad();
  layer->forward(x, mode);
  Tensor grad_in = layer->backward(r);

  const auto loss = [&] { return project(layer->forward(x, mode), r); };
  double worst = finite_difference_error(loss, x.values(), grad_in.values());
  for (Param* p : layer->params()) {
    const Tensor analytic = p->grad;
    worst = std::max(worst, finite_difference_error(loss, p->value.values(), analytic.values()));
  }
  return worst;
}

inline std::vector<LayerCase> layer_cases() {
  return {
      {"conv3x3", [] { return std::make_unique<Conv2D>(2, 3, 3, 1); }, {2, 2, 5, 4}, nullptr},
      {"conv1x1_nopad", [] { return std::make_unique<Conv2D>(3, 2, 1, 0); }, {2, 3, 3, 3}, nullptr},
      {"conv5x5", [] { return std::make_unique<Conv2D>(1, 2, 5, 2); }, {1, 1, 6, 6}, nullptr},
      {"fc", [] { return std::make_unique<FullyConnected>(12, 4); }, {3, 3, 2, 2}, nullptr},
      {"relu", [] { return std::make_unique<ReLU>(); }, {2, 2, 3, 3}, away_from_zero},
      {"maxpool", [] { return std::make_unique<MaxPool2D>(2); }, {2, 2, 5, 4}, distinct_values},
      {"avgpool", [] { return std::make_unique<AvgPoolGlobal>(); }, {2, 3, 3, 4}, nullptr},
      {"avgpool_grid", [] { return std::make_unique<AvgPoolGrid>(4); }, {2, 2, 6, 5}, nullptr},
      {"batchnorm_spatial", [] { return std::make_unique<BatchNorm>(3); }, {4, 3, 2, 2}, nullptr},
      {"batchnorm_flat", [] { return std::make_unique<BatchNorm>(5); }, {6, 5}, nullptr},
  };
}

inline Architecture gradcheck_arch(bool bn, std::size_t hidden = 0) {
  Architecture a = block_architecture({1, 6, 6}, 3, {2, 3}, bn);
  a.head_hidden = hidden;
  return a;
}

inline double joint_error(bool bn, std::size_t hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImpatientNet net = ImpatientNet::build(gradcheck_arch(bn, hidden), seed);
  for (Param* p : net.params()) {
    if (p->name.find("gamma") != std::string::npos) randomize(p->value, rng, 0.5f, 1.5f);
    else if (!p->decay) randomize(p->value, rng, -0.3f, 0.3f);
  }
  const Tensor x = random_tensor({4, 1, 6, 6}, rng);
  const auto labels = std::vector<int>{0, 1, 2, 0};
  std::uniform_real_distribution<double> wd(0.1, 1.0);
  const std::vector<double> w{wd(rng), wd(rng)};
  const double lambda = 0.05;

  net.zero_grad();
  net.joint_loss_backward(x, labels, w, lambda);
  std::vector<Tensor> analytic;
  for (Param* p : net.params()) analytic.push_back(p->grad);

  // Gradients accumulate on every call; only the returned total is used.
  const auto loss = [&] { return net.joint_loss_backward(x, labels, w, lambda).total; };
  std::vector<double> exact, numeric;
  const auto params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    exact.insert(exact.end(), analytic[i].values().begin(), analytic[i].values().end());
    const auto n = numeric_gradient(loss, params[i]->value.values());
    numeric.insert(numeric.end(), n.begin(), n.end());
  }
  return norm_relative_error(exact, numeric);
}

// Trial t alternates batch norm and adds a hidden head layer every third trial.
inline double joint_trial_error(int t) {
  return joint_error(t % 2 == 0, t % 3 == 0 ? 4 : 0, 200 + static_cast<std::uint64_t>(t));
}

}  // namespace impatient::testing
