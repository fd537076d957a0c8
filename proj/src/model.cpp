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

#include "bcres/model.hpp"

#include <cmath>

namespace bcres {

int scaled_width(int base, double tau) {
  if (tau <= 0.0) throw ConfigError("model: tau must be positive");
  const int w = static_cast<int>(std::floor(base * tau + 0.5));
  if (w <= 0)
    throw ConfigError("model: width " + std::to_string(base) + " * tau scales to zero");
  return w;
}

namespace {

void validate_model_config(const ModelConfig& cfg) {
  if (cfg.n_classes <= 0) throw ConfigError("model: n_classes must be positive");
  if (cfg.n_mels <= 0) throw ConfigError("model: n_mels must be positive");
}

ConvSpec make_stem_spec() {
  ConvSpec s;
  s.kh = 5;
  s.kw = 5;
  s.sh = 2;
  s.sw = 1;
  s.ph = 2;
  s.pw = 2;
  return s;
}

ConvSpec make_head_dw_spec(int channels) {
  ConvSpec s;
  s.kh = 5;
  s.kw = 5;
  s.ph = 0;  // no frequency padding: collapses height 5 -> 1
  s.pw = 2;
  s.groups = channels;
  return s;
}

}  // namespace

template <typename T>
Model<T> Model<T>::build(const ModelConfig& cfg, Rng& rng) {
  validate_model_config(cfg);
  Model<T> m;
  m.cfg = cfg;

  const int stem_c = scaled_width(kStemBaseWidth, cfg.tau);
  m.stem_conv = ConvLayer<T>::init(1, stem_c, make_stem_spec(), /*with_bias=*/false, rng);
  m.stem_bn = NormParams<T>::init(stem_c);

  int prev_c = stem_c;
  for (int stage = 0; stage < kNumStages; ++stage) {
    const int width = scaled_width(kStageBaseWidth[stage], cfg.tau);
    for (int i = 0; i < kStageBlocks[stage]; ++i) {
      BlockConfig bc;
      bc.in_channels = prev_c;
      bc.out_channels = width;
      bc.stride_h = i == 0 ? kStageStrideH[stage] : 1;
      bc.temporal_dilation = kStageDilation[stage];
      bc.ssn_sub_bands = cfg.ssn_sub_bands;
      bc.dropout_p = cfg.dropout_p;
      bc.reduce_mode = cfg.reduce_mode;
      bc.combine_mode = cfg.combine_mode;
      m.block_cfgs.push_back(bc);
      m.blocks.push_back(BlockParams<T>::init(bc, rng));
      prev_c = width;
    }
  }

  const int head_c = scaled_width(kHeadBaseWidth, cfg.tau);
  m.head_dw =
      ConvLayer<T>::init(prev_c, prev_c, make_head_dw_spec(prev_c), /*with_bias=*/false, rng);
  m.head_pw = ConvLayer<T>::init(prev_c, head_c, ConvSpec{}, /*with_bias=*/true, rng);
  m.classifier = ConvLayer<T>::init(head_c, cfg.n_classes, ConvSpec{}, /*with_bias=*/true, rng);
  return m;
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, bool training, Rng& rng,
                            ModelCache<T>* cache, std::vector<std::pair<int, int>>* trace) {
  if (x.c != 1)
    throw ConfigError("model: input must have 1 channel, got " + std::to_string(x.c));
  if (x.h != cfg.n_mels)
    throw ConfigError("model: input height must be " + std::to_string(cfg.n_mels) +
                      ", got " + std::to_string(x.h));
  if (trace) trace->clear();
  const auto note = [&](const Tensor<T>& t) {
    if (trace) trace->emplace_back(t.c, t.h);
  };

  if (cache) cache->x = x;
  Tensor<T> stem_lin = conv2d(x, stem_conv);
  NormCache<T> stem_nc;
  Tensor<T> stem_norm = batch_norm(stem_lin, stem_bn, training, cache ? &stem_nc : nullptr);
  Tensor<T> cur = relu(stem_norm);
  note(cur);
  if (cache) {
    cache->stem_lin = std::move(stem_lin);
    cache->stem_bn_cache = std::move(stem_nc);
    cache->stem_norm = std::move(stem_norm);
    cache->stem_act = cur;
    cache->block_caches.assign(blocks.size(), BlockCache<T>{});
  }

  int row_end = 0;  // trace one entry per stage, after its last block
  for (int stage = 0, b = 0; stage < kNumStages; ++stage) {
    row_end += kStageBlocks[stage];
    for (; b < row_end; ++b)
      cur = block_forward(cur, blocks[b], block_cfgs[b], rng, training,
                          cache ? &cache->block_caches[b] : nullptr);
    note(cur);
  }
  if (cache) cache->blocks_out = cur;

  cur = conv2d(cur, head_dw);
  note(cur);
  if (cache) cache->head_dw_out = cur;

  Tensor<T> pw_lin = conv2d(cur, head_pw);
  cur = relu(pw_lin);
  note(cur);
  if (cache) {
    cache->head_pw_lin = std::move(pw_lin);
    cache->head_pw_act = cur;
  }

  cur = avg_pool_time(cur);
  note(cur);
  if (cache) cache->head_pool = cur;

  cur = conv2d(cur, classifier);
  note(cur);
  return cur;
}

template <typename T>
Tensor<T> Model<T>::backward(const ModelCache<T>& cache, const Tensor<T>& glogits) {
  Tensor<T> g, gw, gb;
  conv2d_backward<T>(cache.head_pool, classifier.weight, classifier.spec, glogits, &g, &gw,
                     &gb);
  classifier.weight.grad = std::move(gw.data);
  classifier.bias.grad = std::move(gb.data);

  g = avg_pool_time_backward(cache.head_pw_act.w, g);
  g = relu_backward(cache.head_pw_lin, g);
  {
    Tensor<T> gx;
    conv2d_backward<T>(cache.head_dw_out, head_pw.weight, head_pw.spec, g, &gx, &gw, &gb);
    head_pw.weight.grad = std::move(gw.data);
    head_pw.bias.grad = std::move(gb.data);
    g = std::move(gx);
  }
  {
    Tensor<T> gx;
    conv2d_backward<T>(cache.blocks_out, head_dw.weight, head_dw.spec, g, &gx, &gw, nullptr);
    head_dw.weight.grad = std::move(gw.data);
    g = std::move(gx);
  }

  for (int b = static_cast<int>(blocks.size()) - 1; b >= 0; --b)
    g = block_backward(blocks[b], block_cfgs[b], cache.block_caches[b], g);

  g = relu_backward(cache.stem_norm, g);
  {
    Tensor<T> gx;
    norm_backward(cache.stem_lin, stem_bn, cache.stem_bn_cache, g, &gx);
    g = std::move(gx);
  }
  Tensor<T> gin;
  conv2d_backward<T>(cache.x, stem_conv.weight, stem_conv.spec, g, &gin, &gw, nullptr);
  stem_conv.weight.grad = std::move(gw.data);
  return gin;
}

namespace {

template <typename T, typename Fn>
void visit_norm_params(const std::string& prefix, NormParams<T>& p, const Fn& fn) {
  fn(prefix + ".gamma", p.gamma, false);
  fn(prefix + ".beta", p.beta, false);
}

template <typename T, typename Fn>
void visit_conv_params(const std::string& prefix, ConvLayer<T>& c, const Fn& fn) {
  fn(prefix + ".weight", c.weight, true);
  if (c.has_bias()) fn(prefix + ".bias", c.bias, false);
}

}  // namespace

template <typename T>
void Model<T>::for_each_param(
    const std::function<void(const std::string&, Tensor<T>&, bool)>& fn) {
  visit_conv_params("stem.conv", stem_conv, fn);
  visit_norm_params("stem.bn", stem_bn, fn);
  for (size_t b = 0; b < blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b);
    BlockParams<T>& bp = blocks[b];
    if (block_cfgs[b].is_transition()) {
      visit_conv_params(p + ".front_pw", bp.front_pw, fn);
      visit_norm_params(p + ".front_bn", bp.front_bn, fn);
    }
    visit_conv_params(p + ".f2_dw", bp.f2_dw, fn);
    visit_norm_params(p + ".f2_ssn", bp.f2_ssn, fn);
    visit_conv_params(p + ".f1_dw", bp.f1_dw, fn);
    visit_norm_params(p + ".f1_bn", bp.f1_bn, fn);
    visit_conv_params(p + ".f1_pw", bp.f1_pw, fn);
  }
  visit_conv_params("head.dw", head_dw, fn);
  visit_conv_params("head.pw", head_pw, fn);
  visit_conv_params("classifier", classifier, fn);
}

template <typename T>
void Model<T>::for_each_state(const std::function<void(const std::string&, Tensor<T>&)>& fn) {
  const auto norm_state = [&](const std::string& prefix, NormParams<T>& p) {
    fn(prefix + ".running_mean", p.running_mean);
    fn(prefix + ".running_var", p.running_var);
  };
  norm_state("stem.bn", stem_bn);
  for (size_t b = 0; b < blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b);
    if (block_cfgs[b].is_transition()) norm_state(p + ".front_bn", blocks[b].front_bn);
    norm_state(p + ".f2_ssn", blocks[b].f2_ssn);
    norm_state(p + ".f1_bn", blocks[b].f1_bn);
  }
}

template <typename T>
void Model<T>::zero_grads() {
  for_each_param([](const std::string&, Tensor<T>& t, bool) {
    t.ensure_grad();
    t.zero_grad();
  });
}

template <typename T>
int64_t Model<T>::param_count() {
  int64_t total = 0;
  for_each_param([&](const std::string&, Tensor<T>& t, bool) { total += t.size(); });
  return total;
}

template struct Model<float>;
template struct Model<double>;

}  // namespace bcres
