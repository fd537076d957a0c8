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

// Serial reference kernels: plain nested loops, no OpenMP, same
// accumulation order as the parallel kernels in ops.hpp. Tests assert
// bitwise agreement between the two; the benchmark compares their speed.
// Production code must not link this target.

#ifndef BCRES_REF_OPS_HPP_
#define BCRES_REF_OPS_HPP_

#include <vector>

#include "bcres/ops.hpp"
#include "bcres/tensor.hpp"

namespace bcres {
namespace ref {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                 const ConvSpec& spec);

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const ConvSpec& spec,
                     const Tensor<T>& gout, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb);

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, NormParams<T>& params, bool training,
                     NormCache<T>* cache = nullptr);

template <typename T>
Tensor<T> subspectral_norm(const Tensor<T>& x, NormParams<T>& params, bool training,
                           NormCache<T>* cache = nullptr);

template <typename T>
void norm_backward(const Tensor<T>& x, NormParams<T>& params, const NormCache<T>& cache,
                   const Tensor<T>& gout, Tensor<T>* gx);

template <typename T> Tensor<T> swish(const Tensor<T>& x);
template <typename T> Tensor<T> swish_backward(const Tensor<T>& x, const Tensor<T>& gout);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& gout);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid_backward(const Tensor<T>& x, const Tensor<T>& gout);

template <typename T> Tensor<T> avg_pool_freq(const Tensor<T>& x);
template <typename T> Tensor<T> avg_pool_freq_backward(int input_h, const Tensor<T>& gout);
template <typename T>
Tensor<T> max_pool_freq(const Tensor<T>& x, std::vector<int>* argmax = nullptr);
template <typename T>
Tensor<T> max_pool_freq_backward(const std::vector<int>& argmax, int input_h,
                                 const Tensor<T>& gout);
template <typename T> Tensor<T> avg_pool_time(const Tensor<T>& x);
template <typename T> Tensor<T> avg_pool_time_backward(int input_w, const Tensor<T>& gout);
template <typename T> Tensor<T> broadcast_freq(const Tensor<T>& x, int target_h);
template <typename T> Tensor<T> broadcast_freq_backward(const Tensor<T>& gout);

template <typename T>
Tensor<T> channel_dropout(const Tensor<T>& x, double p, Rng& rng, bool training,
                          std::vector<T>* mask = nullptr);

}  // namespace ref
}  // namespace bcres

#endif  // BCRES_REF_OPS_HPP_
