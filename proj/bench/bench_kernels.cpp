#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "msga/kernels.hpp"

namespace {

namespace k = msga::kernels;

std::vector<double> random_buffer(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <auto Gemm>
void BM_Gemm(benchmark::State& state) {
  const auto n = std::size_t(state.range(0));
  const auto a = random_buffer(n * n, 1), b = random_buffer(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Gemm(k::Trans::kNo, k::Trans::kNo, n, n, n, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(n * n * n));
}

// A backbone-like layer: C -> 2C channels, 3x3, on an S x S map.
k::ConvGeometry conv_geometry(const benchmark::State& state) {
  const auto c = std::size_t(state.range(0)), s = std::size_t(state.range(1));
  return {c, s, s, 2 * c, 3, 3, 1, 1};
}

template <auto Forward>
void BM_ConvForward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_buffer(g.in_channels * g.in_h * g.in_w, 1);
  const auto w = random_buffer(g.out_channels * g.in_channels * 9, 2);
  const auto bias = random_buffer(g.out_channels, 3);
  std::vector<double> y(g.out_channels * g.out_h() * g.out_w());
  for (auto _ : state) {
    Forward(g, x.data(), w.data(), bias.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

template <auto Backward>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_buffer(g.in_channels * g.in_h * g.in_w, 1);
  const auto w = random_buffer(g.out_channels * g.in_channels * 9, 2);
  const auto dy = random_buffer(g.out_channels * g.out_h() * g.out_w(), 3);
  std::vector<double> dx(x.size()), dw(w.size()), db(g.out_channels);
  for (auto _ : state) {
    Backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    benchmark::DoNotOptimize(dx.data());
  }
}

template <auto Upsample>
void BM_Upsample(benchmark::State& state) {
  const auto c = std::size_t(state.range(0)), s = std::size_t(state.range(1));
  const auto x = random_buffer(c * s * s, 1);
  std::vector<double> y(c * 16 * s * s);
  for (auto _ : state) {
    Upsample(c, s, s, 4 * s, 4 * s, x.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_Gemm<k::reference::gemm>)->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<k::parallel::gemm>)->Arg(64)->Arg(256);
BENCHMARK(BM_ConvForward<k::reference::conv2d_forward>)->Args({8, 32})->Args({32, 16});
BENCHMARK(BM_ConvForward<k::parallel::conv2d_forward>)->Args({8, 32})->Args({32, 16});
BENCHMARK(BM_ConvBackward<k::reference::conv2d_backward>)->Args({8, 32})->Args({32, 16});
BENCHMARK(BM_ConvBackward<k::parallel::conv2d_backward>)->Args({8, 32})->Args({32, 16});
BENCHMARK(BM_Upsample<k::reference::upsample_forward>)->Args({16, 8});
BENCHMARK(BM_Upsample<k::parallel::upsample_forward>)->Args({16, 8});

}  // namespace

BENCHMARK_MAIN();
