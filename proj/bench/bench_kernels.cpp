// Serial reference kernels vs. the OpenMP kernels on desk-scale shapes.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "impatient/kernels.hpp"

namespace k = impatient::kernels;

namespace {

std::vector<float> random_values(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

k::ConvGeometry conv_geometry(const benchmark::State& state) {
  k::ConvGeometry g;
  g.batch = 32;
  g.in_channels = static_cast<std::size_t>(state.range(0));
  g.out_channels = static_cast<std::size_t>(state.range(1));
  g.height = g.width = static_cast<std::size_t>(state.range(2));
  g.kernel = 3;
  g.pad = 1;
  return g;
}

std::size_t conv_macs(const k::ConvGeometry& g) {
  return g.batch * g.out_channels * g.out_height() * g.out_width() * g.in_channels * g.kernel * g.kernel;
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto in = random_values(g.batch * g.in_channels * g.height * g.width, 1);
  const auto w = random_values(g.weight_size(), 2);
  const auto b = random_values(g.out_channels, 3);
  std::vector<float> out(g.batch * g.out_channels * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::conv2d_forward(g, in, w, b, out);
    else k::serial::conv2d_forward(g, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["MACs/s"] = benchmark::Counter(static_cast<double>(conv_macs(g)),
                                                benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto in = random_values(g.batch * g.in_channels * g.height * g.width, 1);
  const auto w = random_values(g.weight_size(), 2);
  const auto grad_out = random_values(g.batch * g.out_channels * g.out_height() * g.out_width(), 3);
  std::vector<float> grad_in(in.size()), grad_w(w.size()), grad_b(g.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv2d_backward_input(g, grad_out, w, grad_in);
      k::parallel::conv2d_backward_params(g, in, grad_out, grad_w, grad_b);
    } else {
      k::serial::conv2d_backward_input(g, grad_out, w, grad_in);
      k::serial::conv2d_backward_params(g, in, grad_out, grad_w, grad_b);
    }
    benchmark::DoNotOptimize(grad_in.data());
    benchmark::DoNotOptimize(grad_w.data());
  }
  state.counters["MACs/s"] = benchmark::Counter(2.0 * static_cast<double>(conv_macs(g)),
                                                benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Parallel>
void BM_DenseForward(benchmark::State& state) {
  k::DenseGeometry g{256, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1))};
  const auto in = random_values(g.rows * g.in_features, 1);
  const auto w = random_values(g.in_features * g.out_features, 2);
  const auto b = random_values(g.out_features, 3);
  std::vector<float> out(g.rows * g.out_features);
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::dense_forward(g, in, w, b, out);
    else k::serial::dense_forward(g, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["MACs/s"] = benchmark::Counter(static_cast<double>(g.rows * g.in_features * g.out_features),
                                                benchmark::Counter::kIsIterationInvariantRate);
}

void conv_shapes(benchmark::internal::Benchmark* b) {
  b->Args({1, 8, 16})->Args({8, 16, 8})->Args({16, 32, 4})->Args({32, 64, 16});
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Apply(conv_shapes);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Apply(conv_shapes)->UseRealTime();
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/serial")->Apply(conv_shapes);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Apply(conv_shapes)->UseRealTime();
BENCHMARK(BM_DenseForward<false>)->Name("dense_forward/serial")->Args({512, 64})->Args({128, 10});
BENCHMARK(BM_DenseForward<true>)->Name("dense_forward/parallel")->Args({512, 64})->Args({128, 10})->UseRealTime();

BENCHMARK_MAIN();
