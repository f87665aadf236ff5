// Serial reference vs OpenMP conv3d kernels on toy-model layer shapes.

#include <benchmark/benchmark.h>

#include "lfqv/kernels.hpp"
#include "lfqv/rng.hpp"

namespace {

using namespace lfqv;
using kernels::Padding3;
using kernels::Stride3;

struct Layer {
  Shape input;   // [N,T,H,W,Cin]
  Shape kernel;  // [kt,kh,kw,Cin,Cout]
  Stride3 stride;
};

// Index 0..3: toy encoder stem, mid block, strided downsample, wide decoder conv.
const Layer kLayers[] = {
    {{8, 5, 16, 16, 3}, {3, 3, 3, 3, 16}, {1, 1, 1}},
    {{8, 5, 8, 8, 32}, {3, 3, 3, 32, 32}, {1, 1, 1}},
    {{8, 5, 8, 8, 32}, {3, 3, 3, 32, 64}, {2, 2, 2}},
    {{8, 2, 4, 4, 64}, {3, 3, 3, 64, 256}, {1, 1, 1}},
};

Tensor random(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(s);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

Padding3 causal_pad(const Shape& k) {
  return {{{k[0] - 1, 0}, {(k[1] - 1) / 2, k[1] / 2}, {(k[2] - 1) / 2, k[2] / 2}}};
}

struct Operands {
  Tensor x, w, gy;
  Padding3 pad;
  Stride3 stride;
};

Operands make(const Layer& l) {
  Operands o{random(l.input, 1), random(l.kernel, 2), Tensor({1}), causal_pad(l.kernel), l.stride};
  o.gy = random(kernels::conv3d_output_shape(l.input, l.kernel, l.stride, o.pad), 3);
  return o;
}

template <bool Parallel>
void BM_Forward(benchmark::State& state) {
  const auto o = make(kLayers[state.range(0)]);
  for (auto _ : state) {
    Tensor y = Parallel ? kernels::parallel::conv3d_forward(o.x, o.w, o.stride, o.pad)
                        : kernels::serial::conv3d_forward(o.x, o.w, o.stride, o.pad);
    benchmark::DoNotOptimize(y.data().data());
  }
}

template <bool Parallel>
void BM_BackwardInput(benchmark::State& state) {
  const auto o = make(kLayers[state.range(0)]);
  for (auto _ : state) {
    Tensor g = Parallel ? kernels::parallel::conv3d_backward_input(o.gy, o.w, o.x.shape(), o.stride, o.pad)
                        : kernels::serial::conv3d_backward_input(o.gy, o.w, o.x.shape(), o.stride, o.pad);
    benchmark::DoNotOptimize(g.data().data());
  }
}

template <bool Parallel>
void BM_BackwardKernel(benchmark::State& state) {
  const auto o = make(kLayers[state.range(0)]);
  for (auto _ : state) {
    Tensor g = Parallel ? kernels::parallel::conv3d_backward_kernel(o.gy, o.x, o.w.shape(), o.stride, o.pad)
                        : kernels::serial::conv3d_backward_kernel(o.gy, o.x, o.w.shape(), o.stride, o.pad);
    benchmark::DoNotOptimize(g.data().data());
  }
}

BENCHMARK(BM_Forward<false>)->Name("serial/forward")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward<true>)->Name("parallel/forward")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardInput<false>)->Name("serial/backward_input")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardInput<true>)->Name("parallel/backward_input")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardKernel<false>)->Name("serial/backward_kernel")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardKernel<true>)->Name("parallel/backward_kernel")->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
