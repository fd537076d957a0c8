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

#include "bcres/block.hpp"

#include <string>

namespace bcres {

namespace {

void validate_config(const BlockConfig& cfg) {
  if (cfg.in_channels <= 0 || cfg.out_channels <= 0)
    throw ConfigError("block: channel counts must be positive");
  if (cfg.stride_w != 1)
    throw ConfigError("block: time stride must be 1, got " + std::to_string(cfg.stride_w));
  if (cfg.stride_h <= 0) throw ConfigError("block: frequency stride must be positive");
  if (cfg.temporal_dilation <= 0)
    throw ConfigError("block: temporal dilation must be positive");
  if (cfg.ssn_sub_bands <= 0) throw ConfigError("block: sub-band count must be positive");
  if (cfg.dropout_p < 0.0 || cfg.dropout_p >= 1.0)
    throw ConfigError("block: dropout probability must be in [0, 1)");
}

}  // namespace

template <typename T>
BlockParams<T> BlockParams<T>::init(const BlockConfig& cfg, Rng& rng) {
  validate_config(cfg);
  const int c = cfg.out_channels;
  BlockParams<T> p;
  if (cfg.is_transition()) {
    p.front_pw = ConvLayer<T>::init(cfg.in_channels, c, ConvSpec{}, /*with_bias=*/false, rng);
    p.front_bn = NormParams<T>::init(c);
  }
  ConvSpec f2_spec;
  f2_spec.kh = 3;
  f2_spec.kw = 1;
  f2_spec.sh = cfg.stride_h;
  f2_spec.sw = 1;
  f2_spec.ph = 1;
  f2_spec.groups = c;
  p.f2_dw = ConvLayer<T>::init(c, c, f2_spec, /*with_bias=*/false, rng);
  p.f2_ssn = NormParams<T>::init(c, cfg.ssn_sub_bands);

  ConvSpec f1_spec;
  f1_spec.kh = 1;
  f1_spec.kw = 3;
  f1_spec.dw = cfg.temporal_dilation;
  f1_spec.pw = cfg.temporal_dilation;
  f1_spec.groups = c;
  p.f1_dw = ConvLayer<T>::init(c, c, f1_spec, /*with_bias=*/false, rng);
  p.f1_bn = NormParams<T>::init(c);
  p.f1_pw = ConvLayer<T>::init(c, c, ConvSpec{}, /*with_bias=*/false, rng);
  return p;
}

template <typename T>
Tensor<T> f2_forward(const Tensor<T>& x, BlockParams<T>& params, const BlockConfig& cfg,
                     bool training, BlockCache<T>* cache) {
  if (x.c != cfg.out_channels)
    throw ConfigError("f2: expected " + std::to_string(cfg.out_channels) +
                      " channels, got " + std::to_string(x.c));
  Tensor<T> lin = conv2d(x, params.f2_dw);
  if (lin.h % cfg.ssn_sub_bands != 0)
    throw ConfigError("f2: post-stride height " + std::to_string(lin.h) +
                      " not divisible by " + std::to_string(cfg.ssn_sub_bands) +
                      " sub-bands");
  NormCache<T> nc;
  Tensor<T> out = subspectral_norm(lin, params.f2_ssn, training, cache ? &nc : nullptr);
  if (cache) {
    cache->f2_lin = std::move(lin);
    cache->f2_cache = std::move(nc);
    cache->f2_out = out;
  }
  return out;
}

template <typename T>
Tensor<T> f1_forward(const Tensor<T>& t, BlockParams<T>& params, const BlockConfig& cfg,
                     Rng& rng, bool training, BlockCache<T>* cache) {
  if (t.h != 1)
    throw ConfigError("f1: input height must be 1, got " + std::to_string(t.h));
  Tensor<T> lin = conv2d(t, params.f1_dw);
  NormCache<T> nc;
  Tensor<T> norm = batch_norm(lin, params.f1_bn, training, cache ? &nc : nullptr);
  Tensor<T> act = swish(norm);
  Tensor<T> pw = conv2d(act, params.f1_pw);
  std::vector<T> mask;
  Tensor<T> out =
      channel_dropout(pw, cfg.dropout_p, rng, training, cache ? &mask : nullptr);
  if (cache) {
    cache->f1_lin = std::move(lin);
    cache->f1_cache = std::move(nc);
    cache->f1_norm = std::move(norm);
    cache->f1_act = std::move(act);
    cache->f1_pw_out = std::move(pw);
    cache->dropout_mask = std::move(mask);
    cache->f1_out = out;
  }
  return out;
}

template <typename T>
Tensor<T> block_forward(const Tensor<T>& x, BlockParams<T>& params, const BlockConfig& cfg,
                        Rng& rng, bool training, BlockCache<T>* cache) {
  validate_config(cfg);
  if (x.c != cfg.in_channels)
    throw ConfigError("block: expected " + std::to_string(cfg.in_channels) +
                      " input channels, got " + std::to_string(x.c));
  if (cache) {
    cache->training = training;
    cache->x = x;
  }

  Tensor<T> xprime = x;
  if (cfg.is_transition()) {
    Tensor<T> lin = conv2d(x, params.front_pw);
    NormCache<T> nc;
    Tensor<T> norm = batch_norm(lin, params.front_bn, training, cache ? &nc : nullptr);
    xprime = relu(norm);
    if (cache) {
      cache->front_lin = std::move(lin);
      cache->front_bn_cache = std::move(nc);
      cache->front_norm = std::move(norm);
    }
  }
  if (cache) cache->xprime = xprime;

  Tensor<T> b = f2_forward(xprime, params, cfg, training, cache);

  std::vector<int> argmax;
  Tensor<T> pooled = cfg.reduce_mode == ReduceMode::max
                         ? max_pool_freq(b, cache ? &argmax : nullptr)
                         : avg_pool_freq(b);
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->pooled = pooled;
  }

  Tensor<T> r = f1_forward(pooled, params, cfg, rng, training, cache);

  if (cfg.combine_mode == CombineMode::sigmoid_attention) {
    Tensor<T> att = sigmoid(r);
    Tensor<T> y = broadcast_freq(att, b.h);
    if (cache) cache->attention = std::move(att);
    Tensor<T> base = std::move(b);
    if (!cfg.is_transition()) add_inplace(base, xprime);
    mul_inplace(y, base);
    return y;
  }

  Tensor<T> y = broadcast_freq(r, b.h);
  add_inplace(y, b);
  if (!cfg.is_transition()) add_inplace(y, xprime);
  return y;
}

template <typename T>
Tensor<T> block_backward(BlockParams<T>& params, const BlockConfig& cfg,
                         const BlockCache<T>& cache, const Tensor<T>& gout) {
  // Split gout into the three contributions of
  //   y = [xprime] + f2_out + BC(f1_out)            (broadcast_add)
  //   y = ([xprime] + f2_out) * BC(sigmoid(f1_out)) (sigmoid_attention)
  // where the xprime term is present only in normal blocks.
  Tensor<T> g_b;    // gradient w.r.t. f2_out
  Tensor<T> g_r;    // gradient w.r.t. f1_out
  Tensor<T> g_xid;  // identity-path gradient (normal blocks)
  const bool identity = !cfg.is_transition();

  if (cfg.combine_mode == CombineMode::sigmoid_attention) {
    Tensor<T> base = cache.f2_out;
    if (identity) add_inplace(base, cache.xprime);
    Tensor<T> att_bc = broadcast_freq(cache.attention, base.h);

    Tensor<T> g_base = gout;
    mul_inplace(g_base, att_bc);
    Tensor<T> g_attbc = gout;
    mul_inplace(g_attbc, base);
    Tensor<T> g_att = broadcast_freq_backward(g_attbc);
    g_r = sigmoid_backward(cache.f1_out, g_att);
    g_b = g_base;
    if (identity) g_xid = std::move(g_base);
  } else {
    g_b = gout;
    g_r = broadcast_freq_backward(gout);
    if (identity) g_xid = gout;
  }

  // f1 backward: dropout -> pointwise -> swish -> BN -> temporal depthwise.
  Tensor<T> g = channel_dropout_backward(cache.dropout_mask, g_r);
  {
    Tensor<T> gx, gw;
    conv2d_backward<T>(cache.f1_act, params.f1_pw.weight, params.f1_pw.spec, g, &gx, &gw,
                    nullptr);
    params.f1_pw.weight.grad = std::move(gw.data);
    g = std::move(gx);
  }
  g = swish_backward(cache.f1_norm, g);
  {
    Tensor<T> gx;
    norm_backward(cache.f1_lin, params.f1_bn, cache.f1_cache, g, &gx);
    g = std::move(gx);
  }
  {
    Tensor<T> gx, gw;
    conv2d_backward<T>(cache.pooled, params.f1_dw.weight, params.f1_dw.spec, g, &gx, &gw,
                    nullptr);
    params.f1_dw.weight.grad = std::move(gw.data);
    g = std::move(gx);
  }

  // Pool backward feeds into the f2 gradient alongside the direct term.
  Tensor<T> g_pool = cfg.reduce_mode == ReduceMode::max
                         ? max_pool_freq_backward(cache.argmax, cache.f2_out.h, g)
                         : avg_pool_freq_backward(cache.f2_out.h, g);
  add_inplace(g_b, g_pool);

  // f2 backward: SSN -> frequency depthwise.
  {
    Tensor<T> gx;
    norm_backward(cache.f2_lin, params.f2_ssn, cache.f2_cache, g_b, &gx);
    g = std::move(gx);
  }
  Tensor<T> g_xprime;
  {
    Tensor<T> gw;
    conv2d_backward<T>(cache.xprime, params.f2_dw.weight, params.f2_dw.spec, g, &g_xprime,
                    &gw, nullptr);
    params.f2_dw.weight.grad = std::move(gw.data);
  }
  if (identity) {
    add_inplace(g_xprime, g_xid);
    return g_xprime;
  }

  // Transition front: ReLU -> BN -> pointwise.
  g = relu_backward(cache.front_norm, g_xprime);
  {
    Tensor<T> gx;
    norm_backward(cache.front_lin, params.front_bn, cache.front_bn_cache, g, &gx);
    g = std::move(gx);
  }
  Tensor<T> gx, gw;
  conv2d_backward<T>(cache.x, params.front_pw.weight, params.front_pw.spec, g, &gx, &gw,
                  nullptr);
  params.front_pw.weight.grad = std::move(gw.data);
  return gx;
}

#define BCRES_INSTANTIATE_BLOCK(T)                                                     \
  template struct BlockParams<T>;                                                      \
  template Tensor<T> f2_forward<T>(const Tensor<T>&, BlockParams<T>&,                  \
                                   const BlockConfig&, bool, BlockCache<T>*);          \
  template Tensor<T> f1_forward<T>(const Tensor<T>&, BlockParams<T>&,                  \
                                   const BlockConfig&, Rng&, bool, BlockCache<T>*);    \
  template Tensor<T> block_forward<T>(const Tensor<T>&, BlockParams<T>&,               \
                                      const BlockConfig&, Rng&, bool, BlockCache<T>*); \
  template Tensor<T> block_backward<T>(BlockParams<T>&, const BlockConfig&,            \
                                       const BlockCache<T>&, const Tensor<T>&);

BCRES_INSTANTIATE_BLOCK(float)
BCRES_INSTANTIATE_BLOCK(double)
#undef BCRES_INSTANTIATE_BLOCK

}  // namespace bcres
