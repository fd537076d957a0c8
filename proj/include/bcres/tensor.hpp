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

#ifndef BCRES_TENSOR_HPP_
#define BCRES_TENSOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "bcres/common.hpp"

namespace bcres {

/// Dense 4-D array in (batch, channel, frequency, time) order, row-major.
/// `grad` is an optional same-shape buffer allocated on demand; parameter
/// tensors carry their accumulated gradient there, activations usually
/// leave it empty.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;
  std::vector<T> grad;  // empty, or same length as data

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {
    if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
      throw ConfigError("tensor dimensions must be nonnegative");
  }

  static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }

  int64_t size() const { return static_cast<int64_t>(n) * c * h * w; }

  int64_t idx(int in, int ic, int ih, int iw) const {
    return ((static_cast<int64_t>(in) * c + ic) * h + ih) * w + iw;
  }

  T& at(int in, int ic, int ih, int iw) { return data[idx(in, ic, ih, iw)]; }
  T at(int in, int ic, int ih, int iw) const { return data[idx(in, ic, ih, iw)]; }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  bool has_grad() const { return grad.size() == data.size(); }

  void ensure_grad() {
    if (!has_grad()) grad.assign(data.size(), T(0));
  }

  void zero_grad() {
    if (has_grad()) std::fill(grad.begin(), grad.end(), T(0));
  }

  std::string shape_str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) +
           "x" + std::to_string(w);
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace bcres

#endif  // BCRES_TENSOR_HPP_
