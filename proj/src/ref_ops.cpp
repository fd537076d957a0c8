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

#include "bcres/ref_ops.hpp"

#include <cmath>

namespace bcres {
namespace ref {

namespace {
template <typename T>
inline T stable_sigmoid(T v) {
  if (v >= 0) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}
}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                 const ConvSpec& s) {
  const auto [oh, ow] = conv_output_hw(x.h, x.w, s);
  const int cig = x.c / s.groups;
  const int cog = weight.n / s.groups;
  Tensor<T> y(x.n, weight.n, oh, ow);
  for (int in = 0; in < x.n; ++in)
    for (int co = 0; co < y.c; ++co) {
      const int g = co / cog;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = bias ? bias->data[co] : T(0);
          for (int ic = 0; ic < cig; ++ic)
            for (int ky = 0; ky < s.kh; ++ky) {
              const int iy = oy * s.sh - s.ph + ky * s.dh;
              for (int kx = 0; kx < s.kw; ++kx) {
                const int ix = ox * s.sw - s.pw + kx * s.dw;
                const T v = (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                                ? x.at(in, g * cig + ic, iy, ix)
                                : T(0);
                acc += weight.at(co, ic, ky, kx) * v;
              }
            }
          y.at(in, co, oy, ox) = acc;
        }
    }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const ConvSpec& s,
                     const Tensor<T>& gout, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const auto [oh, ow] = conv_output_hw(x.h, x.w, s);
  const int cig = x.c / s.groups;
  const int cog = weight.n / s.groups;

  if (gx) {
    *gx = Tensor<T>(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
      for (int ci = 0; ci < x.c; ++ci) {
        const int g = ci / cig;
        const int icg = ci % cig;
        for (int iy = 0; iy < x.h; ++iy)
          for (int ix = 0; ix < x.w; ++ix) {
            T acc = 0;
            for (int oc = 0; oc < cog; ++oc) {
              const int co = g * cog + oc;
              for (int ky = 0; ky < s.kh; ++ky) {
                const int ty = iy + s.ph - ky * s.dh;
                if (ty < 0 || ty % s.sh != 0) continue;
                const int oy = ty / s.sh;
                if (oy >= oh) continue;
                for (int kx = 0; kx < s.kw; ++kx) {
                  const int tx = ix + s.pw - kx * s.dw;
                  if (tx < 0 || tx % s.sw != 0) continue;
                  const int ox = tx / s.sw;
                  if (ox >= ow) continue;
                  acc += gout.at(in, co, oy, ox) * weight.at(co, icg, ky, kx);
                }
              }
            }
            gx->at(in, ci, iy, ix) = acc;
          }
      }
  }

  if (gw) {
    *gw = Tensor<T>(weight.n, weight.c, weight.h, weight.w);
    for (int co = 0; co < weight.n; ++co)
      for (int ic = 0; ic < cig; ++ic) {
        const int g = co / cog;
        for (int ky = 0; ky < s.kh; ++ky)
          for (int kx = 0; kx < s.kw; ++kx) {
            T acc = 0;
            for (int in = 0; in < x.n; ++in)
              for (int oy = 0; oy < oh; ++oy) {
                const int iy = oy * s.sh - s.ph + ky * s.dh;
                if (iy < 0 || iy >= x.h) continue;
                for (int ox = 0; ox < ow; ++ox) {
                  const int ix = ox * s.sw - s.pw + kx * s.dw;
                  if (ix < 0 || ix >= x.w) continue;
                  acc += gout.at(in, co, oy, ox) * x.at(in, g * cig + ic, iy, ix);
                }
              }
            gw->at(co, ic, ky, kx) = acc;
          }
      }
  }

  if (gb) {
    *gb = Tensor<T>(1, weight.n, 1, 1);
    for (int co = 0; co < weight.n; ++co) {
      T acc = 0;
      for (int in = 0; in < gout.n; ++in)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) acc += gout.at(in, co, oy, ox);
      gb->data[co] = acc;
    }
  }
}

namespace {

template <typename T>
Tensor<T> norm_forward_serial(const Tensor<T>& x, NormParams<T>& p, bool training,
                              NormCache<T>* cache) {
  const int S = p.sub_bands;
  const int hb = x.h / S;
  const int sets = S * p.channels;
  const int64_t count = static_cast<int64_t>(x.n) * hb * x.w;
  std::vector<T> mean(sets), inv_std(sets);
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
  for (int in = 0; in < x.n; ++in)
    for (int ch = 0; ch < x.c; ++ch)
      for (int iy = 0; iy < x.h; ++iy) {
        const int set = (iy / hb) * p.channels + ch;
        const T scale = p.gamma.data[set] * inv_std[set];
        const T shift = p.beta.data[set] - mean[set] * scale;
        for (int ix = 0; ix < x.w; ++ix)
          y.at(in, ch, iy, ix) = x.at(in, ch, iy, ix) * scale + shift;
      }
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
  return norm_forward_serial(x, p, training, cache);
}

template <typename T>
Tensor<T> subspectral_norm(const Tensor<T>& x, NormParams<T>& p, bool training,
                           NormCache<T>* cache) {
  return norm_forward_serial(x, p, training, cache);
}

template <typename T>
void norm_backward(const Tensor<T>& x, NormParams<T>& p, const NormCache<T>& cache,
                   const Tensor<T>& gout, Tensor<T>* gx) {
  const int S = p.sub_bands;
  const int hb = x.h / S;
  const int sets = S * p.channels;
  const int64_t count = static_cast<int64_t>(x.n) * hb * x.w;
  p.gamma.ensure_grad();
  p.beta.ensure_grad();
  if (gx) *gx = Tensor<T>(x.n, x.c, x.h, x.w);

  for (int set = 0; set < sets; ++set) {
    const int band = set / p.channels;
    const int ch = set % p.channels;
    const int y0 = band * hb;
    const T m = cache.mean[set];
    const T istd = cache.inv_std[set];
    T sum_g = 0, sum_gx = 0;
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
      for (int in = 0; in < x.n; ++in)
        for (int iy = y0; iy < y0 + hb; ++iy)
          for (int ix = 0; ix < x.w; ++ix)
            gx->at(in, ch, iy, ix) = a * gout.at(in, ch, iy, ix);
    }
  }
}

template <typename T>
Tensor<T> swish(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  for (int64_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] * stable_sigmoid(x.data[i]);
  return y;
}

template <typename T>
Tensor<T> swish_backward(const Tensor<T>& x, const Tensor<T>& gout) {
  Tensor<T> gx(x.n, x.c, x.h, x.w);
  for (int64_t i = 0; i < x.size(); ++i) {
    const T s = stable_sigmoid(x.data[i]);
    gx.data[i] = gout.data[i] * (s + x.data[i] * s * (T(1) - s));
  }
  return gx;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  for (int64_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& gout) {
  Tensor<T> gx(x.n, x.c, x.h, x.w);
  for (int64_t i = 0; i < x.size(); ++i) gx.data[i] = x.data[i] > T(0) ? gout.data[i] : T(0);
  return gx;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, x.h, x.w);
  for (int64_t i = 0; i < x.size(); ++i) y.data[i] = stable_sigmoid(x.data[i]);
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& x, const Tensor<T>& gout) {
  Tensor<T> gx(x.n, x.c, x.h, x.w);
  for (int64_t i = 0; i < x.size(); ++i) {
    const T s = stable_sigmoid(x.data[i]);
    gx.data[i] = gout.data[i] * s * (T(1) - s);
  }
  return gx;
}

template <typename T>
Tensor<T> avg_pool_freq(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, 1, x.w);
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
  Tensor<T> gx(gout.n, gout.c, input_h, gout.w);
  const T inv = T(1) / static_cast<T>(input_h);
  for (int in = 0; in < gx.n; ++in)
    for (int ic = 0; ic < gx.c; ++ic)
      for (int iy = 0; iy < input_h; ++iy)
        for (int ix = 0; ix < gx.w; ++ix)
          gx.at(in, ic, iy, ix) = gout.at(in, ic, 0, ix) * inv;
  return gx;
}

template <typename T>
Tensor<T> max_pool_freq(const Tensor<T>& x, std::vector<int>* argmax) {
  Tensor<T> y(x.n, x.c, 1, x.w);
  if (argmax) argmax->assign(static_cast<size_t>(x.n) * x.c * x.w, 0);
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int ix = 0; ix < x.w; ++ix) {
        T best = x.at(in, ic, 0, ix);
        int best_row = 0;
        for (int iy = 1; iy < x.h; ++iy) {
          const T v = x.at(in, ic, iy, ix);
          if (v > best) {
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
  Tensor<T> gx(gout.n, gout.c, input_h, gout.w);
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
  Tensor<T> y(x.n, x.c, x.h, 1);
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
  Tensor<T> gx(gout.n, gout.c, gout.h, input_w);
  const T inv = T(1) / static_cast<T>(input_w);
  for (int in = 0; in < gx.n; ++in)
    for (int ic = 0; ic < gx.c; ++ic)
      for (int iy = 0; iy < gx.h; ++iy)
        for (int ix = 0; ix < input_w; ++ix)
          gx.at(in, ic, iy, ix) = gout.at(in, ic, iy, 0) * inv;
  return gx;
}

template <typename T>
Tensor<T> broadcast_freq(const Tensor<T>& x, int target_h) {
  Tensor<T> y(x.n, x.c, target_h, x.w);
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int iy = 0; iy < target_h; ++iy)
        for (int ix = 0; ix < x.w; ++ix) y.at(in, ic, iy, ix) = x.at(in, ic, 0, ix);
  return y;
}

template <typename T>
Tensor<T> broadcast_freq_backward(const Tensor<T>& gout) {
  Tensor<T> gx(gout.n, gout.c, 1, gout.w);
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
  const size_t pairs = static_cast<size_t>(x.n) * x.c;
  if (!training || p == 0.0) {
    if (mask) mask->assign(pairs, T(1));
    return x;
  }
  std::vector<T> keep(pairs);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (size_t i = 0; i < pairs; ++i) keep[i] = unit(rng) < p ? T(0) : scale;
  Tensor<T> y(x.n, x.c, x.h, x.w);
  const int64_t plane = static_cast<int64_t>(x.h) * x.w;
  for (size_t pair = 0; pair < pairs; ++pair)
    for (int64_t i = 0; i < plane; ++i)
      y.data[pair * plane + i] = x.data[pair * plane + i] * keep[pair];
  if (mask) *mask = std::move(keep);
  return y;
}

#define BCRES_INSTANTIATE_REF(T)                                                        \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,    \
                               const ConvSpec&);                                        \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const ConvSpec&, \
                                   const Tensor<T>&, Tensor<T>*, Tensor<T>*,            \
                                   Tensor<T>*);                                         \
  template Tensor<T> batch_norm<T>(const Tensor<T>&, NormParams<T>&, bool,              \
                                   NormCache<T>*);                                      \
  template Tensor<T> subspectral_norm<T>(const Tensor<T>&, NormParams<T>&, bool,        \
                                         NormCache<T>*);                                \
  template void norm_backward<T>(const Tensor<T>&, NormParams<T>&, const NormCache<T>&, \
                                 const Tensor<T>&, Tensor<T>*);                         \
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
                                        std::vector<T>*);

BCRES_INSTANTIATE_REF(float)
BCRES_INSTANTIATE_REF(double)
#undef BCRES_INSTANTIATE_REF

}  // namespace ref
}  // namespace bcres
