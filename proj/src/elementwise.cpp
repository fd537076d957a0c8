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

#include <cmath>
#include <string>

#include "bcres/ops.hpp"

namespace bcres {

namespace {

template <typename T>
inline T stable_sigmoid(T v) {
  if (v >= 0) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> swish(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  const int64_t sz = x.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) y.data[i] = x.data[i] * stable_sigmoid(x.data[i]);
  return y;
}

template <typename T>
Tensor<T> swish_backward(const Tensor<T>& x, const Tensor<T>& gout) {
  if (!gout.same_shape(x)) throw ConfigError("swish backward shape mismatch");
  Tensor<T> gx(x.n, x.c, x.h, x.w);
  const int64_t sz = x.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) {
    const T s = stable_sigmoid(x.data[i]);
    gx.data[i] = gout.data[i] * (s + x.data[i] * s * (T(1) - s));
  }
  return gx;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  const int64_t sz = x.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& gout) {
  if (!gout.same_shape(x)) throw ConfigError("relu backward shape mismatch");
  Tensor<T> gx(x.n, x.c, x.h, x.w);
  const int64_t sz = x.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) gx.data[i] = x.data[i] > T(0) ? gout.data[i] : T(0);
  return gx;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  const int64_t sz = x.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) y.data[i] = stable_sigmoid(x.data[i]);
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& x, const Tensor<T>& gout) {
  if (!gout.same_shape(x)) throw ConfigError("sigmoid backward shape mismatch");
  Tensor<T> gx(x.n, x.c, x.h, x.w);
  const int64_t sz = x.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) {
    const T s = stable_sigmoid(x.data[i]);
    gx.data[i] = gout.data[i] * s * (T(1) - s);
  }
  return gx;
}

template <typename T>
Tensor<T> avg_pool_freq(const Tensor<T>& x) {
  if (x.h < 1) throw ConfigError("avg_pool_freq needs h >= 1");
  Tensor<T> y(x.n, x.c, 1, x.w);
#pragma omp parallel for collapse(2) schedule(static) if (x.size() > 4096)
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int ix = 0; ix < x.w; ++ix) {
        T acc = 0;
        for (int iy = 0; iy < x.h; ++iy) acc += x.at(in, ic, iy, ix);
        y.at(in, ic, 0, ix) = acc / static_cast<T>(x.h);
      }
  return y;
}

template <typename T>
Tensor<T> avg_pool_freq_backward(int input_h, const Tensor<T>& gout) {
  if (gout.h != 1) throw ConfigError("avg_pool_freq backward expects h=1 gradient");
  Tensor<T> gx(gout.n, gout.c, input_h, gout.w);
  const T inv = T(1) / static_cast<T>(input_h);
  const int64_t sz = gx.size();
#pragma omp parallel for collapse(2) schedule(static) if (sz > 4096)
  for (int in = 0; in < gx.n; ++in)
    for (int ic = 0; ic < gx.c; ++ic)
      for (int iy = 0; iy < input_h; ++iy)
        for (int ix = 0; ix < gx.w; ++ix)
          gx.at(in, ic, iy, ix) = gout.at(in, ic, 0, ix) * inv;
  return gx;
}

template <typename T>
Tensor<T> max_pool_freq(const Tensor<T>& x, std::vector<int>* argmax) {
  if (x.h < 1) throw ConfigError("max_pool_freq needs h >= 1");
  Tensor<T> y(x.n, x.c, 1, x.w);
  if (argmax) argmax->assign(static_cast<size_t>(x.n) * x.c * x.w, 0);
#pragma omp parallel for collapse(2) schedule(static) if (x.size() > 4096)
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int ix = 0; ix < x.w; ++ix) {
        T best = x.at(in, ic, 0, ix);
        int best_row = 0;
        for (int iy = 1; iy < x.h; ++iy) {
          const T v = x.at(in, ic, iy, ix);
          if (v > best) {  // first maximum wins ties
            best = v;
            best_row = iy;
          }
        }
        y.at(in, ic, 0, ix) = best;
        if (argmax) (*argmax)[(static_cast<size_t>(in) * x.c + ic) * x.w + ix] = best_row;
      }
  return y;
}

template <typename T>
Tensor<T> max_pool_freq_backward(const std::vector<int>& argmax, int input_h,
                                 const Tensor<T>& gout) {
  if (gout.h != 1) throw ConfigError("max_pool_freq backward expects h=1 gradient");
  if (argmax.size() != static_cast<size_t>(gout.n) * gout.c * gout.w)
    throw ConfigError("max_pool_freq backward: argmax cache size mismatch");
  Tensor<T> gx(gout.n, gout.c, input_h, gout.w);
#pragma omp parallel for collapse(2) schedule(static) if (gx.size() > 4096)
  for (int in = 0; in < gx.n; ++in)
    for (int ic = 0; ic < gx.c; ++ic)
      for (int ix = 0; ix < gx.w; ++ix) {
        const int row = argmax[(static_cast<size_t>(in) * gx.c + ic) * gx.w + ix];
        gx.at(in, ic, row, ix) = gout.at(in, ic, 0, ix);
      }
  return gx;
}

template <typename T>
Tensor<T> avg_pool_time(const Tensor<T>& x) {
  if (x.w < 1) throw ConfigError("avg_pool_time needs w >= 1");
  Tensor<T> y(x.n, x.c, x.h, 1);
#pragma omp parallel for collapse(2) schedule(static) if (x.size() > 4096)
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int iy = 0; iy < x.h; ++iy) {
        T acc = 0;
        for (int ix = 0; ix < x.w; ++ix) acc += x.at(in, ic, iy, ix);
        y.at(in, ic, iy, 0) = acc / static_cast<T>(x.w);
      }
  return y;
}

template <typename T>
Tensor<T> avg_pool_time_backward(int input_w, const Tensor<T>& gout) {
  if (gout.w != 1) throw ConfigError("avg_pool_time backward expects w=1 gradient");
  Tensor<T> gx(gout.n, gout.c, gout.h, input_w);
  const T inv = T(1) / static_cast<T>(input_w);
#pragma omp parallel for collapse(2) schedule(static) if (gx.size() > 4096)
  for (int in = 0; in < gx.n; ++in)
    for (int ic = 0; ic < gx.c; ++ic)
      for (int iy = 0; iy < gx.h; ++iy)
        for (int ix = 0; ix < input_w; ++ix)
          gx.at(in, ic, iy, ix) = gout.at(in, ic, iy, 0) * inv;
  return gx;
}

template <typename T>
Tensor<T> broadcast_freq(const Tensor<T>& x, int target_h) {
  if (x.h != 1)
    throw ConfigError("broadcast_freq expects h=1 input, got h=" + std::to_string(x.h));
  if (target_h < 1) throw ConfigError("broadcast_freq target height must be positive");
  Tensor<T> y(x.n, x.c, target_h, x.w);
#pragma omp parallel for collapse(2) schedule(static) if (y.size() > 4096)
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int iy = 0; iy < target_h; ++iy)
        for (int ix = 0; ix < x.w; ++ix) y.at(in, ic, iy, ix) = x.at(in, ic, 0, ix);
  return y;
}

template <typename T>
Tensor<T> broadcast_freq_backward(const Tensor<T>& gout) {
  Tensor<T> gx(gout.n, gout.c, 1, gout.w);
#pragma omp parallel for collapse(2) schedule(static) if (gout.size() > 4096)
  for (int in = 0; in < gout.n; ++in)
    for (int ic = 0; ic < gout.c; ++ic)
      for (int ix = 0; ix < gout.w; ++ix) {
        T acc = 0;
        for (int iy = 0; iy < gout.h; ++iy) acc += gout.at(in, ic, iy, ix);
        gx.at(in, ic, 0, ix) = acc;
      }
  return gx;
}

template <typename T>
Tensor<T> channel_dropout(const Tensor<T>& x, double p, Rng& rng, bool training,
                          std::vector<T>* mask) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(p));
  const size_t pairs = static_cast<size_t>(x.n) * x.c;
  if (!training || p == 0.0) {
    if (mask) mask->assign(pairs, T(1));
    return x;  // identity; no RNG consumed
  }
  std::vector<T> keep(pairs);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (size_t i = 0; i < pairs; ++i) keep[i] = unit(rng) < p ? T(0) : scale;

  Tensor<T> y(x.n, x.c, x.h, x.w);
  const int64_t plane = static_cast<int64_t>(x.h) * x.w;
#pragma omp parallel for schedule(static) if (x.size() > 4096)
  for (int64_t pair = 0; pair < static_cast<int64_t>(pairs); ++pair) {
    const T k = keep[pair];
    const int64_t base = pair * plane;
    for (int64_t i = 0; i < plane; ++i) y.data[base + i] = x.data[base + i] * k;
  }
  if (mask) *mask = std::move(keep);
  return y;
}

template <typename T>
Tensor<T> channel_dropout_backward(const std::vector<T>& mask, const Tensor<T>& gout) {
  if (mask.size() != static_cast<size_t>(gout.n) * gout.c)
    throw ConfigError("channel_dropout backward: mask size mismatch");
  Tensor<T> gx(gout.n, gout.c, gout.h, gout.w);
  const int64_t plane = static_cast<int64_t>(gout.h) * gout.w;
#pragma omp parallel for schedule(static) if (gout.size() > 4096)
  for (int64_t pair = 0; pair < static_cast<int64_t>(mask.size()); ++pair) {
    const int64_t base = pair * plane;
    for (int64_t i = 0; i < plane; ++i) gx.data[base + i] = gout.data[base + i] * mask[pair];
  }
  return gx;
}

template <typename T>
void sgd_step(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& velocity, T lr,
              T momentum, T weight_decay) {
  if (!grad.same_shape(param) || !velocity.same_shape(param))
    throw ConfigError("sgd_step shape mismatch");
  const int64_t sz = param.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) {
    velocity.data[i] =
        momentum * velocity.data[i] + (grad.data[i] + weight_decay * param.data[i]);
    param.data[i] -= lr * velocity.data[i];
  }
}

template <typename T>
void sgd_step(Tensor<T>& param, Tensor<T>& velocity, T lr, T momentum, T weight_decay) {
  if (!param.has_grad()) throw ConfigError("sgd_step: parameter has no gradient");
  if (!velocity.same_shape(param)) throw ConfigError("sgd_step shape mismatch");
  const int64_t sz = param.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) {
    velocity.data[i] =
        momentum * velocity.data[i] + (param.grad[i] + weight_decay * param.data[i]);
    param.data[i] -= lr * velocity.data[i];
  }
}

template <typename T>
void add_inplace(Tensor<T>& y, const Tensor<T>& x) {
  if (!x.same_shape(y)) throw ConfigError("add_inplace shape mismatch");
  const int64_t sz = y.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) y.data[i] += x.data[i];
}

template <typename T>
void mul_inplace(Tensor<T>& y, const Tensor<T>& x) {
  if (!x.same_shape(y)) throw ConfigError("mul_inplace shape mismatch");
  const int64_t sz = y.size();
#pragma omp parallel for schedule(static) if (sz > 4096)
  for (int64_t i = 0; i < sz; ++i) y.data[i] *= x.data[i];
}

#define BCRES_INSTANTIATE_ELEMENTWISE(T)                                                \
  template Tensor<T> swish<T>(const Tensor<T>&);                                        \
  template Tensor<T> swish_backward<T>(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> relu<T>(const Tensor<T>&);                                         \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                      \
  template Tensor<T> sigmoid_backward<T>(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> avg_pool_freq<T>(const Tensor<T>&);                                \
  template Tensor<T> avg_pool_freq_backward<T>(int, const Tensor<T>&);                  \
  template Tensor<T> max_pool_freq<T>(const Tensor<T>&, std::vector<int>*);             \
  template Tensor<T> max_pool_freq_backward<T>(const std::vector<int>&, int,            \
                                               const Tensor<T>&);                       \
  template Tensor<T> avg_pool_time<T>(const Tensor<T>&);                                \
  template Tensor<T> avg_pool_time_backward<T>(int, const Tensor<T>&);                  \
  template Tensor<T> broadcast_freq<T>(const Tensor<T>&, int);                          \
  template Tensor<T> broadcast_freq_backward<T>(const Tensor<T>&);                      \
  template Tensor<T> channel_dropout<T>(const Tensor<T>&, double, Rng&, bool,           \
                                        std::vector<T>*);                               \
  template Tensor<T> channel_dropout_backward<T>(const std::vector<T>&, const Tensor<T>&); \
  template void sgd_step<T>(Tensor<T>&, const Tensor<T>&, Tensor<T>&, T, T, T);         \
  template void sgd_step<T>(Tensor<T>&, Tensor<T>&, T, T, T);                           \
  template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);                           \
  template void mul_inplace<T>(Tensor<T>&, const Tensor<T>&);

BCRES_INSTANTIATE_ELEMENTWISE(float)
BCRES_INSTANTIATE_ELEMENTWISE(double)
#undef BCRES_INSTANTIATE_ELEMENTWISE

}  // namespace bcres
