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

// Differentiable tensor kernels used by the network: grouped 2-D
// convolution, batch / sub-spectral normalization, activations, pooling,
// frequency broadcasting, channel dropout, and the SGD update.
//
// All kernels are OpenMP-parallel over independent output sites with a
// fixed serial reduction order per site, so results are bitwise identical
// for any thread count. A plain serial mirror of each kernel lives in
// ref_ops.hpp for testing and benchmarking.

#ifndef BCRES_OPS_HPP_
#define BCRES_OPS_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "bcres/common.hpp"
#include "bcres/tensor.hpp"

namespace bcres {

struct ConvSpec {
  int kh = 1, kw = 1;  // kernel (frequency, time)
  int sh = 1, sw = 1;  // stride
  int dh = 1, dw = 1;  // dilation
  int ph = 0, pw = 0;  // zero padding per side
  int groups = 1;      // must divide both channel counts
};

/// Output (height, width) for an input of the given size, or ConfigError
/// when the spec is inconsistent or the output would be empty.
std::pair<int, int> conv_output_hw(int h, int w, const ConvSpec& spec);

/// Weights plus spec for one convolution. `weight` is laid out
/// (out_channels, in_channels/groups, kh, kw); `bias`, when used, is
/// (1, out_channels, 1, 1).
template <typename T>
struct ConvLayer {
  Tensor<T> weight;
  Tensor<T> bias;  // size 0 when the layer has no bias
  ConvSpec spec;

  bool has_bias() const { return bias.size() > 0; }
  int in_channels() const { return weight.c * spec.groups; }
  int out_channels() const { return weight.n; }

  /// Fan-in-scaled uniform init for the weight, zero bias.
  static ConvLayer init(int in_channels, int out_channels, const ConvSpec& spec,
                        bool with_bias, Rng& rng);
};

/// Affine + running statistics for batch normalization, or for
/// sub-spectral normalization when sub_bands > 1. Each of the four
/// tensors has sub_bands * channels entries, band-major: the entry for
/// (band b, channel c) lives at index b * channels + c.
template <typename T>
struct NormParams {
  int channels = 0;
  int sub_bands = 1;
  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.1);  // running-stat update rate

  static NormParams init(int channels, int sub_bands = 1);
};

/// Statistics a normalization forward actually used, kept for backward.
template <typename T>
struct NormCache {
  bool training = false;
  std::vector<T> mean, inv_std;  // sub_bands * channels entries
};

// --- convolution ---

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                 const ConvSpec& spec);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvLayer<T>& layer);

/// Gradients of a conv2d call. Any of gx / gw / gb may be null to skip
/// that output; non-null outputs are assigned (not accumulated).
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const ConvSpec& spec,
                     const Tensor<T>& gout, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb);

// --- normalization ---

/// Plain batch norm (params.sub_bands must be 1). Training mode
/// normalizes each channel with the batch's own statistics over
/// (n, h, w) and updates the running stats; eval mode uses the running
/// stats. The affine transform is applied last.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, NormParams<T>& params, bool training,
                     NormCache<T>* cache = nullptr);

/// Sub-spectral normalization: the frequency axis is split into
/// params.sub_bands equal bands and each band is batch-normalized
/// independently with its own affine and running stats. h must be
/// divisible by sub_bands.
template <typename T>
Tensor<T> subspectral_norm(const Tensor<T>& x, NormParams<T>& params, bool training,
                           NormCache<T>* cache = nullptr);

/// Backward for either norm flavor. Writes params.gamma.grad and
/// params.beta.grad; gx, when non-null, receives the input gradient.
/// Training-mode backward differentiates through the batch statistics.
template <typename T>
void norm_backward(const Tensor<T>& x, NormParams<T>& params, const NormCache<T>& cache,
                   const Tensor<T>& gout, Tensor<T>* gx);

// --- activations ---

template <typename T> Tensor<T> swish(const Tensor<T>& x);
template <typename T> Tensor<T> swish_backward(const Tensor<T>& x, const Tensor<T>& gout);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& gout);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid_backward(const Tensor<T>& x, const Tensor<T>& gout);

// --- pooling and broadcasting over the frequency axis ---

/// Mean over frequency; output shape (n, c, 1, w).
template <typename T> Tensor<T> avg_pool_freq(const Tensor<T>& x);
template <typename T> Tensor<T> avg_pool_freq_backward(int input_h, const Tensor<T>& gout);

/// Max over frequency; `argmax`, when non-null, records the winning row
/// per output site (first maximum on ties) for backward.
template <typename T>
Tensor<T> max_pool_freq(const Tensor<T>& x, std::vector<int>* argmax = nullptr);
template <typename T>
Tensor<T> max_pool_freq_backward(const std::vector<int>& argmax, int input_h,
                                 const Tensor<T>& gout);

/// Mean over time; output shape (n, c, h, 1). Used by the classifier head.
template <typename T> Tensor<T> avg_pool_time(const Tensor<T>& x);
template <typename T> Tensor<T> avg_pool_time_backward(int input_w, const Tensor<T>& gout);

/// Copies the single frequency row of x (h must be 1) to target_h rows.
/// Backward sums gradients over the copies.
template <typename T> Tensor<T> broadcast_freq(const Tensor<T>& x, int target_h);
template <typename T> Tensor<T> broadcast_freq_backward(const Tensor<T>& gout);

// --- channel dropout ---

/// Zeroes each (sample, channel) pair independently with probability p and
/// scales survivors by 1/(1-p); identity in eval mode. The per-pair
/// multiplier is drawn serially from `rng` (one uniform per pair, sample-
/// major order) and returned through `mask` for backward.
template <typename T>
Tensor<T> channel_dropout(const Tensor<T>& x, double p, Rng& rng, bool training,
                          std::vector<T>* mask = nullptr);
template <typename T>
Tensor<T> channel_dropout_backward(const std::vector<T>& mask, const Tensor<T>& gout);

// --- optimizer ---

/// Classic momentum SGD with coupled weight decay:
///   v <- momentum * v + (grad + weight_decay * param)
///   param <- param - lr * v
template <typename T>
void sgd_step(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& velocity, T lr,
              T momentum, T weight_decay);

/// Variant reading the gradient from param.grad (must be allocated).
template <typename T>
void sgd_step(Tensor<T>& param, Tensor<T>& velocity, T lr, T momentum, T weight_decay);

// --- small elementwise helpers ---

template <typename T> void add_inplace(Tensor<T>& y, const Tensor<T>& x);
template <typename T> void mul_inplace(Tensor<T>& y, const Tensor<T>& x);

// --- multiply counting ---
//
// When enabled, forward kernels accumulate the number of scalar
// multiplications they perform into a process-wide counter. Convention:
// a convolution counts kernel_taps * in_channels_per_group multiplies per
// output element (padding taps included; the kernels really do multiply
// the zero-filled taps), a normalization counts one multiply per element
// (the folded scale), and activations, bias adds, pooling, and residual
// adds count zero.
namespace multcount {
void reset_and_enable();
void disable();
bool enabled();
uint64_t read();
void add(uint64_t count);
}  // namespace multcount

}  // namespace bcres

#endif  // BCRES_OPS_HPP_
