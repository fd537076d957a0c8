// Copyright 2026  The bcres Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parallel kernels vs. the serial reference implementation, at the
// tensor shapes the tau=1 model actually produces on a 40x98 spectrogram.
// The parallel kernels are bitwise-identical to the reference at any
// thread count (fixed per-site reduction order), so this measures pure
// scheduling overhead / speedup. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "bcres/ops.hpp"
#include "bcres/ref_ops.hpp"

namespace {

using bcres::ConvSpec;
using bcres::NormCache;
using bcres::NormParams;
using bcres::Tensor;

Tensor<float> random_tensor(int n, int c, int h, int w, uint64_t seed) {
  Tensor<float> t(n, c, h, w);
  bcres::Rng rng = bcres::make_rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

// Stem: 5x5 dense convolution, 1 -> 16 channels, stride (2,1).
struct StemCase {
  ConvSpec spec;
  Tensor<float> x, w;
  StemCase() : x(random_tensor(1, 1, 40, 98, 1)), w(random_tensor(16, 1, 5, 5, 2)) {
    spec.kh = spec.kw = 5;
    spec.sh = 2;
    spec.ph = spec.pw = 2;
  }
};

// f2: 3x1 depthwise convolution over frequency, 20 channels.
struct DepthwiseCase {
  ConvSpec spec;
  Tensor<float> x, w;
  DepthwiseCase()
      : x(random_tensor(1, 20, 5, 98, 3)), w(random_tensor(20, 1, 3, 1, 4)) {
    spec.kh = 3;
    spec.ph = 1;
    spec.groups = 20;
  }
};

// f1: 1x1 pointwise convolution, 20 -> 20 channels at height 1.
struct PointwiseCase {
  ConvSpec spec;
  Tensor<float> x, w;
  PointwiseCase()
      : x(random_tensor(1, 20, 1, 98, 5)), w(random_tensor(20, 20, 1, 1, 6)) {}
};

template <typename Case, bool kParallel>
void bench_conv_forward(benchmark::State& state) {
  Case c;
  for (auto _ : state) {
    if constexpr (kParallel)
      benchmark::DoNotOptimize(bcres::conv2d<float>(c.x, c.w, nullptr, c.spec));
    else
      benchmark::DoNotOptimize(bcres::ref::conv2d<float>(c.x, c.w, nullptr, c.spec));
  }
}

template <typename Case, bool kParallel>
void bench_conv_backward(benchmark::State& state) {
  Case c;
  const Tensor<float> y = bcres::conv2d<float>(c.x, c.w, nullptr, c.spec);
  const Tensor<float> gout = random_tensor(y.n, y.c, y.h, y.w, 7);
  for (auto _ : state) {
    Tensor<float> gx, gw;
    if constexpr (kParallel)
      bcres::conv2d_backward<float>(c.x, c.w, c.spec, gout, &gx, &gw, nullptr);
    else
      bcres::ref::conv2d_backward<float>(c.x, c.w, c.spec, gout, &gx, &gw, nullptr);
    benchmark::DoNotOptimize(gx.data.data());
    benchmark::DoNotOptimize(gw.data.data());
  }
}

template <bool kParallel>
void bench_subspectral_norm(benchmark::State& state) {
  Tensor<float> x = random_tensor(100, 16, 5, 98, 8);
  NormParams<float> params = NormParams<float>::init(16, 5);
  for (auto _ : state) {
    NormCache<float> cache;
    if constexpr (kParallel)
      benchmark::DoNotOptimize(bcres::subspectral_norm(x, params, true, &cache));
    else
      benchmark::DoNotOptimize(bcres::ref::subspectral_norm(x, params, true, &cache));
  }
}

template <bool kParallel>
void bench_swish(benchmark::State& state) {
  Tensor<float> x = random_tensor(100, 16, 20, 98, 9);
  for (auto _ : state) {
    if constexpr (kParallel)
      benchmark::DoNotOptimize(bcres::swish(x));
    else
      benchmark::DoNotOptimize(bcres::ref::swish(x));
  }
}

BENCHMARK(bench_conv_forward<StemCase, true>)->Name("stem_conv/parallel");
BENCHMARK(bench_conv_forward<StemCase, false>)->Name("stem_conv/serial");
BENCHMARK(bench_conv_forward<DepthwiseCase, true>)->Name("depthwise_conv/parallel");
BENCHMARK(bench_conv_forward<DepthwiseCase, false>)->Name("depthwise_conv/serial");
BENCHMARK(bench_conv_forward<PointwiseCase, true>)->Name("pointwise_conv/parallel");
BENCHMARK(bench_conv_forward<PointwiseCase, false>)->Name("pointwise_conv/serial");
BENCHMARK(bench_conv_backward<StemCase, true>)->Name("stem_conv_backward/parallel");
BENCHMARK(bench_conv_backward<StemCase, false>)->Name("stem_conv_backward/serial");
BENCHMARK(bench_subspectral_norm<true>)->Name("subspectral_norm/parallel");
BENCHMARK(bench_subspectral_norm<false>)->Name("subspectral_norm/serial");
BENCHMARK(bench_swish<true>)->Name("swish/parallel");
BENCHMARK(bench_swish<false>)->Name("swish/serial");

}  // namespace

BENCHMARK_MAIN();
