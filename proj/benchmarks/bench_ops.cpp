#include <benchmark/benchmark.h>

#include <random>

#include "dsfcnn/gconv.hpp"
#include "dsfcnn/tensor.hpp"

namespace {

dsf::Tensor4 random_tensor(long b, long c, long h, long w) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  dsf::Tensor4 t(b, c, h, w);
  for (double& v : t.data()) v = uni(rng);
  return t;
}

dsf::KernelStack random_kernels(long o, long c, long k) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uni(-0.3, 0.3);
  dsf::KernelStack ks(o, c, k, k);
  for (double& v : ks.data) v = uni(rng);
  return ks;
}

void BM_conv2d_same(benchmark::State& state) {
  const long c = state.range(0), hw = state.range(1), k = state.range(2);
  const dsf::Tensor4 x = random_tensor(32, c, hw, hw);
  const dsf::KernelStack ks = random_kernels(c, c, k);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsf::conv2d(x, ks, dsf::Padding::Same));
  }
  state.SetItemsProcessed(state.iterations() * 32 * c * c * hw * hw * k * k);
}
BENCHMARK(BM_conv2d_same)
    ->Args({48, 16, 5})
    ->Args({48, 8, 7})
    ->Args({16, 32, 5});

void BM_hidden_g_conv(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  const long hw = state.range(2);
  const dsf::FrequencySpec spec{{{0, 0}, {1, 2}, {2, 2}}};
  const dsf::SteerableBasis basis = dsf::build_basis(spec, 5, 0.6);
  dsf::GConvLayer layer = dsf::GConvLayer::hidden_layer(
      basis, dsf::GroupConfig::cyclic(n), c, c);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(-0.3, 0.3);
  for (double& v : layer.weights) v = uni(rng);
  dsf::GFeatureMap f(8, c, layer.group, hw, hw);
  for (double& v : f.data.data()) v = uni(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsf::hidden_g_conv(f, layer));
  }
}
BENCHMARK(BM_hidden_g_conv)->Args({8, 6, 16})->Args({4, 8, 16});

void BM_synthesize_hidden_kernels(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const dsf::FrequencySpec spec{{{0, 0}, {1, 2}, {2, 3}, {3, 2}}};
  const dsf::SteerableBasis basis = dsf::build_basis(spec, 7, 0.6);
  dsf::GConvLayer layer = dsf::GConvLayer::hidden_layer(
      basis, dsf::GroupConfig::cyclic(n), 8, 8);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> uni(-0.3, 0.3);
  for (double& v : layer.weights) v = uni(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsf::synthesize_hidden_kernels(layer));
  }
}
BENCHMARK(BM_synthesize_hidden_kernels)->Arg(4)->Arg(8);

void BM_build_basis(benchmark::State& state) {
  const dsf::FrequencySpec spec{{{0, 0}, {1, 2}, {2, 3}, {3, 2}}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(dsf::build_basis(spec, 7, 0.6));
  }
}
BENCHMARK(BM_build_basis);

}  // namespace

BENCHMARK_MAIN();
