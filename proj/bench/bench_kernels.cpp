// Reference (serial loops) vs parallel (im2col + GEMM, OpenMP) kernels on
// layer shapes from the 2D 64x64 model and a 32^3 volume.
#include <benchmark/benchmark.h>

#include <random>

#include "lckd/kernels.hpp"

namespace {

using lckd::ConvShape;
using lckd::Extent;
using lckd::Tensor;

Tensor<float> noise(int c, Extent e, unsigned seed) {
  Tensor<float> t(c, e);
  std::mt19937 rng(seed);
  std::normal_distribution<float> n(0.f, 1.f);
  for (auto& v : t.data) v = n(rng);
  return t;
}

struct Layer {
  ConvShape shape;
  Extent in;
};

// args: in_channels, out_channels, side, stride, volumetric
Layer layer(const benchmark::State& st) {
  Layer l;
  l.shape.in_channels = static_cast<int>(st.range(0));
  l.shape.out_channels = static_cast<int>(st.range(1));
  l.shape.stride = static_cast<int>(st.range(3));
  l.shape.volumetric = st.range(4) != 0;
  const int s = static_cast<int>(st.range(2));
  l.in = {l.shape.volumetric ? s : 1, s, s};
  return l;
}

void label(benchmark::State& st, const Layer& l) {
  st.SetLabel(std::to_string(l.shape.in_channels) + "->" + std::to_string(l.shape.out_channels) + " @" +
              std::to_string(l.in.height) + (l.shape.volumetric ? "^3" : "^2") +
              (l.shape.stride > 1 ? " s2" : ""));
}

template <bool Parallel>
void BM_conv_forward(benchmark::State& st) {
  const Layer l = layer(st);
  const auto x = noise(l.shape.in_channels, l.in, 1);
  const auto w = noise(1, {1, 1, static_cast<int>(l.shape.weight_count())}, 2);
  const std::vector<float> b(l.shape.out_channels, 0.1f);
  Tensor<float> y(l.shape.out_channels, l.shape.output(l.in));
  for (auto _ : st) {
    if constexpr (Parallel) lckd::parallel::conv_forward<float>(l.shape, x, w.data, b, y);
    else lckd::reference::conv_forward<float>(l.shape, x, w.data, b, y);
    benchmark::DoNotOptimize(y.data.data());
  }
  label(st, l);
}

template <bool Parallel>
void BM_conv_backward(benchmark::State& st) {
  const Layer l = layer(st);
  const auto x = noise(l.shape.in_channels, l.in, 1);
  const auto w = noise(1, {1, 1, static_cast<int>(l.shape.weight_count())}, 2);
  const auto gy = noise(l.shape.out_channels, l.shape.output(l.in), 3);
  Tensor<float> gx(l.shape.in_channels, l.in);
  std::vector<float> gw(l.shape.weight_count()), gb(l.shape.out_channels);
  for (auto _ : st) {
    if constexpr (Parallel) lckd::parallel::conv_backward<float>(l.shape, x, w.data, gy, &gx, gw, gb);
    else lckd::reference::conv_backward<float>(l.shape, x, w.data, gy, &gx, gw, gb);
    benchmark::DoNotOptimize(gx.data.data());
  }
  label(st, l);
}

template <bool Parallel>
void BM_instance_norm(benchmark::State& st) {
  const int c = static_cast<int>(st.range(0));
  const int s = static_cast<int>(st.range(1));
  const auto x = noise(c, {1, s, s}, 4);
  const std::vector<float> gamma(c, 1.f), beta(c, 0.f);
  Tensor<float> y(c, x.extent), xhat(c, x.extent);
  std::vector<float> inv_std;
  for (auto _ : st) {
    if constexpr (Parallel) lckd::parallel::instance_norm_forward<float>(x, gamma, beta, y, xhat, inv_std);
    else lckd::reference::instance_norm_forward<float>(x, gamma, beta, y, xhat, inv_std);
    benchmark::DoNotOptimize(y.data.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"cin", "cout", "side", "stride", "vol"});
  b->Args({4, 16, 64, 1, 0});   // first encoder stage
  b->Args({16, 32, 64, 2, 0});  // downsampling
  b->Args({64, 64, 8, 1, 0});   // bottleneck
  b->Args({4, 16, 32, 1, 1});   // volumetric first stage
  b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_conv_forward<false>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(BM_conv_forward<true>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(BM_conv_backward<false>)->Name("conv_backward/reference")->Apply(conv_args);
BENCHMARK(BM_conv_backward<true>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(BM_instance_norm<false>)->Name("instance_norm/reference")->Args({16, 64})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_instance_norm<true>)->Name("instance_norm/parallel")->Args({16, 64})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
