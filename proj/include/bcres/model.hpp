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

// The full network: a 5x5 stem convolution (stride (2,1)) + BN + ReLU,
// four stages of broadcasted residual blocks with widths {8,12,16,20}
// scaled by tau, a 5x5 depthwise tail that collapses the frequency axis,
// a pointwise expansion to 32*tau, global time averaging, and a 1x1
// classifier. Also: analytic parameter / multiply counting and a
// checkpoint format.

#ifndef BCRES_MODEL_HPP_
#define BCRES_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bcres/block.hpp"
#include "bcres/common.hpp"
#include "bcres/ops.hpp"
#include "bcres/tensor.hpp"

namespace bcres {

inline constexpr int kNumStages = 4;
inline constexpr int kStageBlocks[kNumStages] = {2, 2, 4, 4};
inline constexpr int kStageBaseWidth[kNumStages] = {8, 12, 16, 20};
inline constexpr int kStageStrideH[kNumStages] = {1, 2, 2, 1};
inline constexpr int kStageDilation[kNumStages] = {1, 2, 4, 8};
inline constexpr int kStemBaseWidth = 16;
inline constexpr int kHeadBaseWidth = 32;

struct ModelConfig {
  double tau = 1.0;
  int n_classes = 12;
  int n_mels = 40;
  int ssn_sub_bands = 5;
  double dropout_p = 0.1;
  ReduceMode reduce_mode = ReduceMode::avg;
  CombineMode combine_mode = CombineMode::broadcast_add;
};

/// base * tau rounded half up. Throws ConfigError when the result is not
/// positive (tau too small for the narrowest stage).
int scaled_width(int base, double tau);

/// Per-layer cost ledger entry; `params` counts learnable scalars and
/// `mults` counts scalar multiplications for one single-example forward
/// pass. Counting convention: a convolution contributes
/// out_elements * (kernel_taps * in_channels_per_group), padding taps
/// included; a normalization contributes one multiply per element (the
/// folded scale); activations, bias adds, pooling, and residual adds
/// contribute zero.
struct CostLine {
  std::string name;
  int64_t params = 0;
  uint64_t mults = 0;
};

struct CostReport {
  int64_t params = 0;
  uint64_t mults = 0;
  std::vector<CostLine> lines;
};

/// Walks the layer map with closed-form shape arithmetic; never touches
/// the kernels, so it can cross-check an instrumented forward pass.
CostReport count_costs(const ModelConfig& cfg, int frames);
int64_t count_params(const ModelConfig& cfg);
uint64_t count_mults(const ModelConfig& cfg, int frames);

template <typename T>
struct ModelCache {
  Tensor<T> x;
  Tensor<T> stem_lin;
  NormCache<T> stem_bn_cache;
  Tensor<T> stem_norm;  // pre-ReLU
  Tensor<T> stem_act;
  std::vector<BlockCache<T>> block_caches;
  Tensor<T> blocks_out;
  Tensor<T> head_dw_out;
  Tensor<T> head_pw_lin;  // pre-ReLU
  Tensor<T> head_pw_act;
  Tensor<T> head_pool;
};

template <typename T>
struct Model {
  ModelConfig cfg;
  ConvLayer<T> stem_conv;  // 5x5, stride (2,1), pad (2,2), no bias
  NormParams<T> stem_bn;
  std::vector<BlockConfig> block_cfgs;
  std::vector<BlockParams<T>> blocks;
  ConvLayer<T> head_dw;     // depthwise 5x5, no frequency padding, time padding 2
  ConvLayer<T> head_pw;     // 1x1 -> 32*tau, with bias, ReLU after
  ConvLayer<T> classifier;  // 1x1 -> n_classes, with bias
  uint64_t step = 0;        // optimizer steps taken; persisted in checkpoints

  static Model build(const ModelConfig& cfg, Rng& rng);

  /// x is (n, 1, n_mels, frames); returns logits (n, n_classes, 1, 1).
  /// `shape_trace`, when non-null, receives the (channels, height) pair
  /// after each layer-map row. `rng` feeds the per-block dropout draws.
  /// Training mode updates the running norm statistics, so the model is
  /// not const here even though the weights are read-only.
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng,
                    ModelCache<T>* cache = nullptr,
                    std::vector<std::pair<int, int>>* shape_trace = nullptr);

  /// Assigns every parameter gradient and returns the input gradient.
  Tensor<T> backward(const ModelCache<T>& cache, const Tensor<T>& glogits);

  /// Visits every learnable tensor as (name, tensor, decay); `decay` is
  /// true only for convolution weights.
  void for_each_param(const std::function<void(const std::string&, Tensor<T>&, bool)>& fn);
  /// Visits every non-learnable state tensor (running norm statistics).
  void for_each_state(const std::function<void(const std::string&, Tensor<T>&)>& fn);

  void zero_grads();
  int64_t param_count();  // total scalars visited by for_each_param
};

// Checkpoint file: magic "BCRK", format version u32, config block,
// manifest of (name, shape, offset), float32 little-endian blob holding
// parameters and running statistics, trailing CRC32.
void save_checkpoint(Model<float>& model, const std::string& path);
Model<float> load_checkpoint(const std::string& path);

uint32_t crc32(const uint8_t* data, size_t len);

}  // namespace bcres

#endif  // BCRES_MODEL_HPP_
