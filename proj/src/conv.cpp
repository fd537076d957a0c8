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

#include <atomic>
#include <cmath>
#include <string>

#include "bcres/ops.hpp"

namespace bcres {

namespace multcount {
namespace {
std::atomic<uint64_t> g_total{0};
std::atomic<bool> g_enabled{false};
}  // namespace

void reset_and_enable() {
  g_total.store(0);
  g_enabled.store(true);
}
void disable() { g_enabled.store(false); }
bool enabled() { return g_enabled.load(std::memory_order_relaxed); }
uint64_t read() { return g_total.load(); }
void add(uint64_t count) { g_total.fetch_add(count); }
}  // namespace multcount

namespace {

void validate_spec(const ConvSpec& s) {
  if (s.kh < 1 || s.kw < 1 || s.sh < 1 || s.sw < 1 || s.dh < 1 || s.dw < 1 ||
      s.ph < 0 || s.pw < 0 || s.groups < 1)
    throw ConfigError("conv spec has non-positive kernel/stride/dilation or negative padding");
}

template <typename T>
void validate_conv_args(const Tensor<T>& x, const Tensor<T>& weight, const ConvSpec& s) {
  validate_spec(s);
  if (x.c % s.groups != 0 || weight.n % s.groups != 0)
    throw ConfigError("conv groups=" + std::to_string(s.groups) +
                      " must divide in_channels=" + std::to_string(x.c) +
                      " and out_channels=" + std::to_string(weight.n));
  if (weight.c != x.c / s.groups)
    throw ConfigError("conv weight expects " + std::to_string(weight.c) +
                      " input channels per group, input has " +
                      std::to_string(x.c / s.groups));
  if (weight.h != s.kh || weight.w != s.kw)
    throw ConfigError("conv weight kernel " + std::to_string(weight.h) + "x" +
                      std::to_string(weight.w) + " does not match spec " +
                      std::to_string(s.kh) + "x" + std::to_string(s.kw));
}

}  // namespace

std::pair<int, int> conv_output_hw(int h, int w, const ConvSpec& s) {
  validate_spec(s);
  const int span_h = s.dh * (s.kh - 1) + 1;
  const int span_w = s.dw * (s.kw - 1) + 1;
  const int oh = (h + 2 * s.ph - span_h) / s.sh + 1;
  const int ow = (w + 2 * s.pw - span_w) / s.sw + 1;
  if (h + 2 * s.ph < span_h || w + 2 * s.pw < span_w || oh < 1 || ow < 1)
    throw ConfigError("conv output would be empty: input " + std::to_string(h) + "x" +
                      std::to_string(w) + ", kernel span " + std::to_string(span_h) +
                      "x" + std::to_string(span_w) + ", padding " +
                      std::to_string(s.ph) + "," + std::to_string(s.pw));
  return {oh, ow};
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                 const ConvSpec& s) {
  validate_conv_args(x, weight, s);
  if (bias && bias->size() != weight.n)
    throw ConfigError("conv bias has " + std::to_string(bias->size()) +
                      " entries for " + std::to_string(weight.n) + " output channels");
  const auto [oh, ow] = conv_output_hw(x.h, x.w, s);
  const int cig = x.c / s.groups;   // in channels per group
  const int cog = weight.n / s.groups;  // out channels per group
  Tensor<T> y(x.n, weight.n, oh, ow);

  const bool mc = multcount::enabled();
  const uint64_t taps = static_cast<uint64_t>(cig) * s.kh * s.kw;
  uint64_t mults = 0;

#pragma omp parallel for collapse(2) schedule(static) reduction(+ : mults) \
    if (y.size() > 4096)
  for (int in = 0; in < x.n; ++in) {
    for (int co = 0; co < y.c; ++co) {
      const int g = co / cog;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          T acc = bias ? bias->data[co] : T(0);
          for (int ic = 0; ic < cig; ++ic) {
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
          }
          y.at(in, co, oy, ox) = acc;
          if (mc) mults += taps;
        }
      }
    }
  }
  if (mc) multcount::add(mults);
  return y;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvLayer<T>& layer) {
  return conv2d(x, layer.weight, layer.has_bias() ? &layer.bias : nullptr, layer.spec);
}

// Backward kernels are written in gather form: every output site of the
// gradient is produced by exactly one loop iteration, so the parallel
// loops never race and the summation order is fixed.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const ConvSpec& s,
                     const Tensor<T>& gout, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  validate_conv_args(x, weight, s);
  const auto [oh, ow] = conv_output_hw(x.h, x.w, s);
  if (gout.n != x.n || gout.c != weight.n || gout.h != oh || gout.w != ow)
    throw ConfigError("conv backward: upstream gradient shape " + gout.shape_str() +
                      " does not match forward output");
  const int cig = x.c / s.groups;
  const int cog = weight.n / s.groups;

  if (gx) {
    *gx = Tensor<T>(x.n, x.c, x.h, x.w);
#pragma omp parallel for collapse(2) schedule(static) if (gx->size() > 4096)
    for (int in = 0; in < x.n; ++in) {
      for (int ci = 0; ci < x.c; ++ci) {
        const int g = ci / cig;
        const int icg = ci % cig;
        for (int iy = 0; iy < x.h; ++iy) {
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
    }
  }

  if (gw) {
    *gw = Tensor<T>(weight.n, weight.c, weight.h, weight.w);
#pragma omp parallel for collapse(2) schedule(static) if (gout.size() > 4096)
    for (int co = 0; co < weight.n; ++co) {
      for (int ic = 0; ic < cig; ++ic) {
        const int g = co / cog;
        for (int ky = 0; ky < s.kh; ++ky) {
          for (int kx = 0; kx < s.kw; ++kx) {
            T acc = 0;
            for (int in = 0; in < x.n; ++in) {
              for (int oy = 0; oy < oh; ++oy) {
                const int iy = oy * s.sh - s.ph + ky * s.dh;
                if (iy < 0 || iy >= x.h) continue;
                for (int ox = 0; ox < ow; ++ox) {
                  const int ix = ox * s.sw - s.pw + kx * s.dw;
                  if (ix < 0 || ix >= x.w) continue;
                  acc += gout.at(in, co, oy, ox) * x.at(in, g * cig + ic, iy, ix);
                }
              }
            }
            gw->at(co, ic, ky, kx) = acc;
          }
        }
      }
    }
  }

  if (gb) {
    *gb = Tensor<T>(1, weight.n, 1, 1);
#pragma omp parallel for schedule(static) if (gout.size() > 4096)
    for (int co = 0; co < weight.n; ++co) {
      T acc = 0;
      for (int in = 0; in < gout.n; ++in)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) acc += gout.at(in, co, oy, ox);
      gb->data[co] = acc;
    }
  }
}

template <typename T>
ConvLayer<T> ConvLayer<T>::init(int in_channels, int out_channels, const ConvSpec& spec,
                                bool with_bias, Rng& rng) {
  if (in_channels < 1 || out_channels < 1)
    throw ConfigError("conv layer needs positive channel counts");
  if (in_channels % spec.groups != 0 || out_channels % spec.groups != 0)
    throw ConfigError("conv layer channels not divisible by groups");
  ConvLayer<T> layer;
  layer.spec = spec;
  layer.weight = Tensor<T>(out_channels, in_channels / spec.groups, spec.kh, spec.kw);
  const double fan_in = static_cast<double>(in_channels / spec.groups) * spec.kh * spec.kw;
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : layer.weight.data) v = static_cast<T>(dist(rng));
  if (with_bias) layer.bias = Tensor<T>(1, out_channels, 1, 1);
  return layer;
}

#define BCRES_INSTANTIATE_CONV(T)                                                       \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,    \
                               const ConvSpec&);                                        \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const ConvLayer<T>&);                  \
  template void conv2d_backward<T>(const Tensor<T>&, const Tensor<T>&, const ConvSpec&, \
                                   const Tensor<T>&, Tensor<T>*, Tensor<T>*,            \
                                   Tensor<T>*);                                         \
  template struct ConvLayer<T>;

BCRES_INSTANTIATE_CONV(float)
BCRES_INSTANTIATE_CONV(double)
#undef BCRES_INSTANTIATE_CONV

}  // namespace bcres
