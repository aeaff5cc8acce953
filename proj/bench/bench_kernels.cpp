// Parallel kernels against their serial references on training-sized shapes.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "steinrul/kernels.hpp"

namespace {

namespace k = steinrul::kernels;

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Batch of 512 flattened 30x14 windows into a 100-unit dense layer.
template <auto Fn>
void BM_matmul(benchmark::State& state) {
  const std::size_t m = 512, kk = 420, n = 100;
  const auto a = random_vector(m * kk, 1), b = random_vector(kk * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Fn(a, b, c, m, kk, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * kk * n));
}

const k::ConvGeometry kConv{256, 1, 30, 14, 8, 5, 14};

template <auto Fn>
void BM_conv2d(benchmark::State& state) {
  const auto x = random_vector(kConv.batch * kConv.in_channels * kConv.height * kConv.width, 3);
  const auto w = random_vector(kConv.out_channels * kConv.in_channels * kConv.kernel_h * kConv.kernel_w, 4);
  const auto bias = random_vector(kConv.out_channels, 5);
  std::vector<double> y(kConv.batch * kConv.out_channels * kConv.out_h() * kConv.out_w());
  for (auto _ : state) {
    Fn(x, w, bias, y, kConv);
    benchmark::DoNotOptimize(y.data());
  }
}

template <auto Fn>
void BM_conv2d_backward(benchmark::State& state) {
  const auto x = random_vector(kConv.batch * kConv.in_channels * kConv.height * kConv.width, 3);
  const auto w = random_vector(kConv.out_channels * kConv.in_channels * kConv.kernel_h * kConv.kernel_w, 4);
  const auto dy = random_vector(kConv.batch * kConv.out_channels * kConv.out_h() * kConv.out_w(), 6);
  std::vector<double> dx(x.size()), dw(w.size()), db(kConv.out_channels);
  for (auto _ : state) {
    Fn(x, w, dy, dx, dw, db, kConv);
    benchmark::DoNotOptimize(dw.data());
  }
}

// Particle distances for the SVGD kernel: 50 particles of a dense network.
template <auto Fn>
void BM_pairwise_sq_dist(benchmark::State& state) {
  const std::size_t m = 50, d = static_cast<std::size_t>(state.range(0));
  const auto p = random_vector(m * d, 7);
  std::vector<double> out(m * m);
  for (auto _ : state) {
    Fn(p, out, m, d);
    benchmark::DoNotOptimize(out.data());
  }
}

BENCHMARK(BM_matmul<k::matmul>)->Name("matmul/parallel");
BENCHMARK(BM_matmul<k::serial::matmul>)->Name("matmul/serial");
BENCHMARK(BM_conv2d<k::conv2d>)->Name("conv2d/parallel");
BENCHMARK(BM_conv2d<k::serial::conv2d>)->Name("conv2d/serial");
BENCHMARK(BM_conv2d_backward<k::conv2d_backward>)->Name("conv2d_backward/parallel");
BENCHMARK(BM_conv2d_backward<k::serial::conv2d_backward>)->Name("conv2d_backward/serial");
BENCHMARK(BM_pairwise_sq_dist<k::pairwise_sq_dist>)->Name("pairwise_sq_dist/parallel")->Arg(62401);
BENCHMARK(BM_pairwise_sq_dist<k::serial::pairwise_sq_dist>)->Name("pairwise_sq_dist/serial")->Arg(62401);

}  // namespace

BENCHMARK_MAIN();
