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

#include <algorithm>
#include <cmath>
#include <vector>

#include "bcres/block.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bcres;
using testutil::bitwise_equal;
using testutil::random_tensor;

namespace {

BlockConfig normal_config() {
  BlockConfig cfg;
  cfg.in_channels = 8;
  cfg.out_channels = 8;
  cfg.temporal_dilation = 4;
  return cfg;
}

BlockConfig transition_config() {
  BlockConfig cfg;
  cfg.in_channels = 6;
  cfg.out_channels = 10;
  cfg.stride_h = 2;
  cfg.temporal_dilation = 2;
  return cfg;
}

/// The block math spelled out with the raw ops, in the same order the
/// block uses them; any drift between the two is a bug in one of them.
template <typename T>
Tensor<T> manual_block(const Tensor<T>& x, BlockParams<T>& params,
                       const BlockConfig& cfg, Rng& rng, bool training) {
  Tensor<T> xprime = x;
  if (cfg.is_transition()) {
    Tensor<T> lin = conv2d(x, params.front_pw);
    xprime = relu(batch_norm(lin, params.front_bn, training));
  }
  Tensor<T> b = subspectral_norm(conv2d(xprime, params.f2_dw), params.f2_ssn, training);
  Tensor<T> pooled = cfg.reduce_mode == ReduceMode::max ? max_pool_freq(b)
                                                        : avg_pool_freq(b);
  Tensor<T> t = conv2d(pooled, params.f1_dw);
  t = swish(batch_norm(t, params.f1_bn, training));
  t = conv2d(t, params.f1_pw);
  Tensor<T> r = channel_dropout(t, cfg.dropout_p, rng, training);

  if (cfg.combine_mode == CombineMode::sigmoid_attention) {
    Tensor<T> y = broadcast_freq(sigmoid(r), b.h);
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

void zero_weights(BlockParams<float>& params) {
  for (Tensor<float>* t : {&params.f2_dw.weight, &params.f1_dw.weight,
                           &params.f1_pw.weight})
    std::fill(t->data.begin(), t->data.end(), 0.0f);
}

}  // namespace

TEST_CASE("block: zero-weight normal block is the exact identity") {
  const BlockConfig cfg = normal_config();
  const Tensor<float> x = random_tensor<float>(2, 8, 5, 12, 101);
  Rng init = make_rng(102);
  BlockParams<float> params = BlockParams<float>::init(cfg, init);
  zero_weights(params);
  // Both residual branches emit exact zeros (their norms see an all-zero
  // batch and beta starts at zero), so y = 0 + 0 + x, bitwise.
  for (const bool training : {true, false}) {
    Rng rng = make_rng(103);
    BlockParams<float> p = params;
    const Tensor<float> y = block_forward(x, p, cfg, rng, training);
    CAPTURE(training);
    CHECK(bitwise_equal(y, x));
  }
}

TEST_CASE("block: forward equals the manual op-by-op composition bitwise") {
  for (const bool transition : {false, true}) {
    BlockConfig cfg = transition ? transition_config() : normal_config();
    for (const bool attention : {false, true}) {
      for (const bool max_reduce : {false, true}) {
        cfg.combine_mode =
            attention ? CombineMode::sigmoid_attention : CombineMode::broadcast_add;
        cfg.reduce_mode = max_reduce ? ReduceMode::max : ReduceMode::avg;
        const Tensor<float> x =
            random_tensor<float>(2, cfg.in_channels, transition ? 10 : 5, 9, 111);
        Rng init = make_rng(112, transition, attention);
        BlockParams<float> params = BlockParams<float>::init(cfg, init);
        BlockParams<float> p1 = params, p2 = params;
        Rng r1 = make_rng(113), r2 = make_rng(113);
        const Tensor<float> got = block_forward(x, p1, cfg, r1, /*training=*/true);
        const Tensor<float> want = manual_block(x, p2, cfg, r2, /*training=*/true);
        CAPTURE(transition);
        CAPTURE(attention);
        CAPTURE(max_reduce);
        CHECK(bitwise_equal(got, want));
        // Both paths consumed the same dropout draws.
        CHECK(r1() == r2());
      }
    }
  }
}

TEST_CASE("subspectral_norm equals slicing into bands and batch-norming each") {
  const int bands = 5, channels = 3, hb = 2;
  const Tensor<float> x = random_tensor<float>(4, channels, bands * hb, 7, 121);
  NormParams<float> ssn = NormParams<float>::init(channels, bands);
  // Give every band distinct affine parameters so the test can tell
  // band-major apart from channel-major layouts.
  for (int i = 0; i < static_cast<int>(ssn.gamma.size()); ++i) {
    ssn.gamma.data[i] = 1.0f + 0.1f * static_cast<float>(i);
    ssn.beta.data[i] = -0.05f * static_cast<float>(i);
  }
  NormParams<float> ssn_run = ssn;
  const Tensor<float> got = subspectral_norm(x, ssn_run, /*training=*/true);

  Tensor<float> want(x.n, x.c, x.h, x.w);
  for (int band = 0; band < bands; ++band) {
    Tensor<float> slice(x.n, channels, hb, x.w);
    for (int n = 0; n < x.n; ++n)
      for (int c = 0; c < channels; ++c)
        for (int h = 0; h < hb; ++h)
          for (int w = 0; w < x.w; ++w)
            slice.at(n, c, h, w) = x.at(n, c, band * hb + h, w);
    NormParams<float> bn = NormParams<float>::init(channels);
    for (int c = 0; c < channels; ++c) {
      bn.gamma.data[c] = ssn.gamma.data[band * channels + c];
      bn.beta.data[c] = ssn.beta.data[band * channels + c];
    }
    const Tensor<float> normed = batch_norm(slice, bn, /*training=*/true);
    for (int n = 0; n < x.n; ++n)
      for (int c = 0; c < channels; ++c)
        for (int h = 0; h < hb; ++h)
          for (int w = 0; w < x.w; ++w)
            want.at(n, c, band * hb + h, w) = normed.at(n, c, h, w);
    // The band's running statistics must land in the band-major slots.
    for (int c = 0; c < channels; ++c) {
      CHECK(ssn_run.running_mean.data[band * channels + c] ==
            bn.running_mean.data[c]);
      CHECK(ssn_run.running_var.data[band * channels + c] == bn.running_var.data[c]);
    }
  }
  CHECK(bitwise_equal(got, want));
}

TEST_CASE("block: transition reshapes and drops the identity path") {
  const BlockConfig cfg = transition_config();
  const Tensor<float> x = random_tensor<float>(2, 6, 10, 9, 131);
  Rng init = make_rng(132);
  BlockParams<float> params = BlockParams<float>::init(cfg, init);
  CHECK(params.front_pw.weight.n == 10);
  CHECK(params.f2_dw.spec.sh == 2);
  CHECK(params.f1_dw.spec.dw == 2);
  CHECK(params.f1_dw.spec.pw == 2);
  Rng rng = make_rng(133);
  BlockCache<float> cache;
  const Tensor<float> y = block_forward(x, params, cfg, rng, true, &cache);
  CHECK(y.c == 10);
  CHECK(y.h == 5);  // stride 2: (10 + 2 - 3) / 2 + 1
  CHECK(y.w == 9);
  const Tensor<float> gout = random_tensor<float>(2, 10, 5, 9, 134);
  const Tensor<float> gx = block_backward(params, cfg, cache, gout);
  CHECK(gx.same_shape(x));
  for (const float v : gx.data) CHECK(std::isfinite(v));
  CHECK(params.front_pw.weight.has_grad());
  CHECK(params.f1_pw.weight.has_grad());
}

TEST_CASE("block: variant backwards agree with finite differences on probes") {
  // The default path is covered exhaustively by the gradient checker;
  // here the max-reduce and attention variants get spot checks in
  // double precision.
  for (const bool attention : {false, true}) {
    for (const bool max_reduce : {false, true}) {
      if (!attention && !max_reduce) continue;
      BlockConfig cfg = normal_config();
      cfg.dropout_p = 0.0;
      cfg.combine_mode =
          attention ? CombineMode::sigmoid_attention : CombineMode::broadcast_add;
      cfg.reduce_mode = max_reduce ? ReduceMode::max : ReduceMode::avg;
      Tensor<double> x = random_tensor<double>(2, 8, 5, 6, 141);
      Rng init = make_rng(142, attention, max_reduce);
      BlockParams<double> params = BlockParams<double>::init(cfg, init);

      BlockParams<double> p = params;
      BlockCache<double> cache;
      Rng rng = make_rng(0);
      const Tensor<double> y = block_forward(x, p, cfg, rng, true, &cache);
      const Tensor<double> probe = random_tensor<double>(y.n, y.c, y.h, y.w, 143);
      const Tensor<double> gx = block_backward(p, cfg, cache, probe);

      const auto objective = [&] {
        BlockParams<double> q = params;
        Rng r = make_rng(0);
        const Tensor<double> out = block_forward(x, q, cfg, r, true);
        double s = 0.0;
        for (int64_t i = 0; i < out.size(); ++i) s += out.data[i] * probe.data[i];
        return s;
      };
      const double step = 1e-6;
      for (const int64_t i : {int64_t{0}, int64_t{57}, int64_t{201}, x.size() - 1}) {
        const double keep = x.data[i];
        x.data[i] = keep + step;
        const double up = objective();
        x.data[i] = keep - step;
        const double down = objective();
        x.data[i] = keep;
        const double numeric = (up - down) / (2.0 * step);
        CAPTURE(attention);
        CAPTURE(max_reduce);
        CAPTURE(i);
        CHECK(std::abs(gx.data[i] - numeric) <=
              1e-5 * std::max(1.0, std::abs(gx.data[i])));
      }
    }
  }
}

TEST_CASE("block: configuration validation") {
  Rng rng = make_rng(151);
  BlockConfig cfg = normal_config();
  SUBCASE("time stride is fixed at one") {
    cfg.stride_w = 2;
    CHECK_THROWS_AS(BlockParams<float>::init(cfg, rng), ConfigError);
  }
  SUBCASE("dropout probability below one") {
    cfg.dropout_p = 1.0;
    CHECK_THROWS_AS(BlockParams<float>::init(cfg, rng), ConfigError);
  }
  SUBCASE("height must divide into sub-bands after the stride") {
    BlockParams<float> params = BlockParams<float>::init(cfg, rng);
    const Tensor<float> x = random_tensor<float>(1, 8, 7, 4, 152);
    Rng drop = make_rng(0);
    CHECK_THROWS_AS(block_forward(x, params, cfg, drop, true), ConfigError);
  }
  SUBCASE("channel count must match the config") {
    BlockParams<float> params = BlockParams<float>::init(cfg, rng);
    const Tensor<float> x = random_tensor<float>(1, 3, 5, 4, 153);
    Rng drop = make_rng(0);
    CHECK_THROWS_AS(block_forward(x, params, cfg, drop, true), ConfigError);
  }
}

TEST_CASE("block: dropout stream is reproducible and epoch-dependent") {
  const BlockConfig cfg = normal_config();
  const Tensor<float> x = random_tensor<float>(2, 8, 5, 6, 161);
  Rng init = make_rng(162);
  BlockParams<float> params = BlockParams<float>::init(cfg, init);
  const auto run = [&](uint64_t seed) {
    BlockParams<float> p = params;
    Rng rng = make_rng(seed);
    return block_forward(x, p, cfg, rng, /*training=*/true);
  };
  CHECK(bitwise_equal(run(7), run(7)));
  CHECK_FALSE(bitwise_equal(run(7), run(8)));
}
