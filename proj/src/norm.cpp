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

template <typename T>
NormParams<T> NormParams<T>::init(int channels, int sub_bands) {
  if (channels < 1 || sub_bands < 1)
    throw ConfigError("norm needs positive channel and sub-band counts");
  NormParams<T> p;
  p.channels = channels;
  p.sub_bands = sub_bands;
  const int m = sub_bands * channels;
  p.gamma = Tensor<T>(1, m, 1, 1);
  p.beta = Tensor<T>(1, m, 1, 1);
  p.running_mean = Tensor<T>(1, m, 1, 1);
  p.running_var = Tensor<T>(1, m, 1, 1);
  std::fill(p.gamma.data.begin(), p.gamma.data.end(), T(1));
  std::fill(p.running_var.data.begin(), p.running_var.data.end(), T(1));
  return p;
}

namespace {

template <typename T>
void validate_norm_args(const Tensor<T>& x, const NormParams<T>& p) {
  if (x.c != p.channels)
    throw ConfigError("norm expects " + std::to_string(p.channels) +
                      " channels, input has " + std::to_string(x.c));
  if (p.gamma.size() != static_cast<int64_t>(p.sub_bands) * p.channels)
    throw ConfigError("norm affine parameter count does not match sub_bands*channels");
  if (p.sub_bands > 1 && x.h % p.sub_bands != 0)
    throw ConfigError("frequency height " + std::to_string(x.h) +
                      " is not divisible by " + std::to_string(p.sub_bands) +
                      " sub-bands");
}

// Shared forward for BN (S=1) and SSN (S>1). Statistics are reduced
// serially per (band, channel) in sample-major order, which is exactly the
// order a slice-and-normalize composition would use, so the two agree
// bitwise. The normalize step is folded to one multiply per element.
template <typename T>
Tensor<T> norm_forward(const Tensor<T>& x, NormParams<T>& p, bool training,
                       NormCache<T>* cache) {
  validate_norm_args(x, p);
  const int S = p.sub_bands;
  const int hb = x.h / S;  // rows per band
  const int sets = S * p.channels;
  const int64_t count = static_cast<int64_t>(x.n) * hb * x.w;
  if (count == 0) throw ConfigError("norm over an empty tensor");

  std::vector<T> mean(sets), inv_std(sets);

#pragma omp parallel for schedule(static) if (x.size() > 4096)
  for (int set = 0; set < sets; ++set) {
    const int band = set / p.channels;
    const int ch = set % p.channels;
    const int y0 = band * hb;
    T m, v;
    if (training) {
      T sum = 0;
      for (int in = 0; in < x.n; ++in)
        for (int iy = y0; iy < y0 + hb; ++iy)
          for (int ix = 0; ix < x.w; ++ix) sum += x.at(in, ch, iy, ix);
      m = sum / static_cast<T>(count);
      T sq = 0;
      for (int in = 0; in < x.n; ++in)
        for (int iy = y0; iy < y0 + hb; ++iy)
          for (int ix = 0; ix < x.w; ++ix) {
            const T d = x.at(in, ch, iy, ix) - m;
            sq += d * d;
          }
      v = sq / static_cast<T>(count);
      // biased variance for both normalization and the running stats
      p.running_mean.data[set] =
          (T(1) - p.momentum) * p.running_mean.data[set] + p.momentum * m;
      p.running_var.data[set] =
          (T(1) - p.momentum) * p.running_var.data[set] + p.momentum * v;
    } else {
      m = p.running_mean.data[set];
      v = p.running_var.data[set];
    }
    mean[set] = m;
    inv_std[set] = T(1) / std::sqrt(v + p.eps);
  }

  Tensor<T> y(x.n, x.c, x.h, x.w);
  const bool mc = multcount::enabled();

#pragma omp parallel for collapse(2) schedule(static) if (x.size() > 4096)
  for (int in = 0; in < x.n; ++in) {
    for (int ch = 0; ch < x.c; ++ch) {
      for (int iy = 0; iy < x.h; ++iy) {
        const int set = (iy / hb) * p.channels + ch;
        const T scale = p.gamma.data[set] * inv_std[set];
        const T shift = p.beta.data[set] - mean[set] * scale;
        for (int ix = 0; ix < x.w; ++ix)
          y.at(in, ch, iy, ix) = x.at(in, ch, iy, ix) * scale + shift;
      }
    }
  }
  if (mc) multcount::add(static_cast<uint64_t>(x.size()));

  if (cache) {
    cache->training = training;
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

}  // namespace

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, NormParams<T>& p, bool training,
                     NormCache<T>* cache) {
  if (p.sub_bands != 1)
    throw ConfigError("batch_norm called with sub_bands=" + std::to_string(p.sub_bands) +
                      "; use subspectral_norm");
  return norm_forward(x, p, training, cache);
}

template <typename T>
Tensor<T> subspectral_norm(const Tensor<T>& x, NormParams<T>& p, bool training,
                           NormCache<T>* cache) {
  return norm_forward(x, p, training, cache);
}

template <typename T>
void norm_backward(const Tensor<T>& x, NormParams<T>& p, const NormCache<T>& cache,
                   const Tensor<T>& gout, Tensor<T>* gx) {
  validate_norm_args(x, p);
  if (!gout.same_shape(x))
    throw ConfigError("norm backward: gradient shape " + gout.shape_str() +
                      " does not match input " + x.shape_str());
  const int S = p.sub_bands;
  const int hb = x.h / S;
  const int sets = S * p.channels;
  const int64_t count = static_cast<int64_t>(x.n) * hb * x.w;
  p.gamma.ensure_grad();
  p.beta.ensure_grad();
  if (gx) *gx = Tensor<T>(x.n, x.c, x.h, x.w);

#pragma omp parallel for schedule(static) if (x.size() > 4096)
  for (int set = 0; set < sets; ++set) {
    const int band = set / p.channels;
    const int ch = set % p.channels;
    const int y0 = band * hb;
    const T m = cache.mean[set];
    const T istd = cache.inv_std[set];
    T sum_g = 0, sum_gx = 0;  // sum of gout and of gout * xhat
    for (int in = 0; in < x.n; ++in)
      for (int iy = y0; iy < y0 + hb; ++iy)
        for (int ix = 0; ix < x.w; ++ix) {
          const T g = gout.at(in, ch, iy, ix);
          sum_g += g;
          sum_gx += g * (x.at(in, ch, iy, ix) - m) * istd;
        }
    p.gamma.grad[set] = sum_gx;
    p.beta.grad[set] = sum_g;
    if (!gx) continue;
    const T a = p.gamma.data[set] * istd;
    if (cache.training) {
      const T mg = sum_g / static_cast<T>(count);
      const T mgx = sum_gx / static_cast<T>(count);
      for (int in = 0; in < x.n; ++in)
        for (int iy = y0; iy < y0 + hb; ++iy)
          for (int ix = 0; ix < x.w; ++ix) {
            const T xhat = (x.at(in, ch, iy, ix) - m) * istd;
            gx->at(in, ch, iy, ix) = a * (gout.at(in, ch, iy, ix) - mg - xhat * mgx);
          }
    } else {
      // running stats are constants in eval mode
      for (int in = 0; in < x.n; ++in)
        for (int iy = y0; iy < y0 + hb; ++iy)
          for (int ix = 0; ix < x.w; ++ix)
            gx->at(in, ch, iy, ix) = a * gout.at(in, ch, iy, ix);
    }
  }
}

#define BCRES_INSTANTIATE_NORM(T)                                                     \
  template struct NormParams<T>;                                                      \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, NormParams<T>&, bool,            \
                                   NormCache<T>*);                                    \
  template Tensor<T> subspectral_norm<T>(const Tensor<T>&, NormParams<T>&, bool,      \
                                         NormCache<T>*);                              \
  template void norm_backward<T>(const Tensor<T>&, NormParams<T>&, const NormCache<T>&, \
                                 const Tensor<T>&, Tensor<T>*);

BCRES_INSTANTIATE_NORM(float)
BCRES_INSTANTIATE_NORM(double)
#undef BCRES_INSTANTIATE_NORM

}  // namespace bcres
