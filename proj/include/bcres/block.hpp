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

// The broadcasted residual block. A normal block computes
//
//   y = x + f2(x) + BC(f1(pool(f2(x))))
//
// where f2 is a 3x1 frequency-depthwise convolution followed by
// sub-spectral normalization, pool collapses the frequency axis, f1 is a
// 1x3 dilated temporal depthwise convolution + batch norm + swish + 1x1
// pointwise convolution + channel dropout, and BC copies the resulting
// single frequency row back to the full height. A transition block first
// runs a pointwise convolution + BN + ReLU to change the channel count
// and drops the identity term.

#ifndef BCRES_BLOCK_HPP_
#define BCRES_BLOCK_HPP_

#include "bcres/common.hpp"
#include "bcres/ops.hpp"
#include "bcres/tensor.hpp"

namespace bcres {

enum class ReduceMode { avg, max };
enum class CombineMode { broadcast_add, sigmoid_attention };

struct BlockConfig {
  int in_channels = 0;
  int out_channels = 0;
  int stride_h = 1;
  int stride_w = 1;  // must stay 1; the time axis is never strided
  int temporal_dilation = 1;
  int ssn_sub_bands = 5;
  double dropout_p = 0.1;
  ReduceMode reduce_mode = ReduceMode::avg;
  CombineMode combine_mode = CombineMode::broadcast_add;

  bool is_transition() const {
    return in_channels != out_channels || stride_h != 1 || stride_w != 1;
  }
};

template <typename T>
struct BlockParams {
  // Transition front (weight tensors stay empty for normal blocks).
  ConvLayer<T> front_pw;
  NormParams<T> front_bn;
  // f2: frequency-depthwise conv + sub-spectral norm.
  ConvLayer<T> f2_dw;
  NormParams<T> f2_ssn;
  // f1: temporal depthwise conv + BN + swish + pointwise conv + dropout.
  ConvLayer<T> f1_dw;
  NormParams<T> f1_bn;
  ConvLayer<T> f1_pw;

  static BlockParams init(const BlockConfig& cfg, Rng& rng);
};

/// Every intermediate a backward pass needs. Populated by the forward
/// functions when a cache pointer is supplied.
template <typename T>
struct BlockCache {
  bool training = false;
  Tensor<T> x;          // block input
  Tensor<T> front_lin;  // front pointwise output (transition only)
  NormCache<T> front_bn_cache;
  Tensor<T> front_norm;  // front BN output, pre-ReLU (transition only)
  Tensor<T> xprime;      // f2 input (== x for normal blocks)
  Tensor<T> f2_lin;      // depthwise conv output, pre-SSN
  NormCache<T> f2_cache;
  Tensor<T> f2_out;         // SSN output; the 2-D residual term
  std::vector<int> argmax;  // winning rows when reduce_mode == max
  Tensor<T> pooled;
  Tensor<T> f1_lin;  // temporal depthwise output, pre-BN
  NormCache<T> f1_cache;
  Tensor<T> f1_norm;   // BN output, pre-swish
  Tensor<T> f1_act;    // swish output
  Tensor<T> f1_pw_out;  // pointwise output, pre-dropout
  std::vector<T> dropout_mask;
  Tensor<T> f1_out;     // the 1-D residual term
  Tensor<T> attention;  // sigmoid(f1_out) when combine_mode == sigmoid_attention
};

/// f2: 3x1 depthwise conv (frequency padding 1, stride (sh, 1)) + SSN.
/// x must already have cfg.out_channels channels. The post-stride height
/// must be divisible by cfg.ssn_sub_bands.
template <typename T>
Tensor<T> f2_forward(const Tensor<T>& x, BlockParams<T>& params, const BlockConfig& cfg,
                     bool training, BlockCache<T>* cache = nullptr);

/// f1: 1x3 depthwise conv (dilation (1, dw), time padding dw) + BN +
/// swish + 1x1 pointwise + channel dropout. Input height must be 1 and
/// the time length is preserved.
template <typename T>
Tensor<T> f1_forward(const Tensor<T>& t, BlockParams<T>& params, const BlockConfig& cfg,
                     Rng& rng, bool training, BlockCache<T>* cache = nullptr);

template <typename T>
Tensor<T> block_forward(const Tensor<T>& x, BlockParams<T>& params, const BlockConfig& cfg,
                        Rng& rng, bool training, BlockCache<T>* cache = nullptr);

/// Backward through one block. Parameter gradients are assigned into the
/// .grad fields of params (not accumulated); the return value is the
/// gradient with respect to the block input.
template <typename T>
Tensor<T> block_backward(BlockParams<T>& params, const BlockConfig& cfg,
                         const BlockCache<T>& cache, const Tensor<T>& gout);

}  // namespace bcres

#endif  // BCRES_BLOCK_HPP_
