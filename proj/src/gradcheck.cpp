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

#include "bcres/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "bcres/block.hpp"
#include "bcres/ops.hpp"
#include "bcres/trainer.hpp"

namespace bcres {

namespace {

using TensorD = Tensor<double>;

TensorD random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1.0,
                      double hi = 1.0) {
  TensorD t(n, c, h, w);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

double dot(const TensorD& a, const TensorD& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

/// Central differences of f with respect to the storage `v`, restored
/// after probing.
std::vector<double> fd_grad(const std::function<double()>& f, std::vector<double>& v,
                            double step) {
  std::vector<double> g(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + step;
    const double up = f();
    v[i] = keep - step;
    const double down = f();
    v[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double max_diff = 0.0, max_a = 0.0, max_n = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(analytic[i] - numeric[i]));
    max_a = std::max(max_a, std::abs(analytic[i]));
    max_n = std::max(max_n, std::abs(numeric[i]));
  }
  return max_diff / std::max({1e-6, max_a, max_n});
}

struct Harness {
  const GradCheckOptions& opt;
  std::vector<GradCheckResult> results;

  // One result line per op: the max error over every seed and tensor.
  void record(const std::string& name, double err) {
    for (auto& r : results)
      if (r.name == name) {
        r.max_rel_err = std::max(r.max_rel_err, err);
        r.pass = r.max_rel_err <= opt.tol;
        return;
      }
    results.push_back({name, err, err <= opt.tol});
  }

  void check(const std::string& name, const std::function<double()>& objective,
             std::vector<double>& storage, const std::vector<double>& analytic) {
    check_at(name, objective, storage, analytic, opt.step);
  }

  void check_at(const std::string& name, const std::function<double()>& objective,
                std::vector<double>& storage, const std::vector<double>& analytic,
                double step) {
    record(name, rel_err(analytic, fd_grad(objective, storage, step)));
  }
};

void check_conv(Harness& h, uint64_t seed, bool grouped) {
  Rng rng = make_rng(0xC0117, seed, grouped);
  const std::string name = grouped ? "conv2d_grouped" : "conv2d";
  ConvSpec spec;
  TensorD x, weight, bias;
  if (grouped) {
    spec.kh = 3;
    spec.kw = 1;
    spec.sh = 2;
    spec.ph = 1;
    spec.groups = 4;
    x = random_tensor(2, 4, 6, 5, rng);
    weight = random_tensor(4, 1, 3, 1, rng);
  } else {
    spec.kh = 3;
    spec.kw = 3;
    spec.sh = 2;
    spec.sw = 1;
    spec.ph = 1;
    spec.pw = 2;
    spec.dw = 2;
    x = random_tensor(2, 3, 6, 7, rng);
    weight = random_tensor(4, 3, 3, 3, rng);
    bias = random_tensor(1, 4, 1, 1, rng);
  }
  const TensorD* bias_ptr = grouped ? nullptr : &bias;
  const TensorD probe = [&] {
    const TensorD y = conv2d(x, weight, bias_ptr, spec);
    Rng wr = make_rng(0x90B3, seed, grouped);
    return random_tensor(y.n, y.c, y.h, y.w, wr);
  }();
  const auto objective = [&] { return dot(conv2d(x, weight, bias_ptr, spec), probe); };

  TensorD gx, gw, gb;
  conv2d_backward(x, weight, spec, probe, &gx, &gw, grouped ? nullptr : &gb);
  h.check(name, objective, x.data, gx.data);
  h.check(name, objective, weight.data, gw.data);
  if (!grouped) h.check(name, objective, bias.data, gb.data);
}

void check_norm(Harness& h, uint64_t seed, int sub_bands) {
  Rng rng = make_rng(0x2302, seed, static_cast<uint64_t>(sub_bands));
  const std::string name = sub_bands > 1 ? "subspectral_norm" : "batch_norm";
  const int c = 3, hgt = sub_bands > 1 ? 2 * sub_bands : 4, wid = 5;
  TensorD x = random_tensor(2, c, hgt, wid, rng);
  NormParams<double> params = NormParams<double>::init(c, sub_bands);
  for (auto& v : params.gamma.data) v = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
  for (auto& v : params.beta.data) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  const TensorD probe = random_tensor(2, c, hgt, wid, rng);

  const auto objective = [&] {
    NormParams<double> p = params;  // keep running stats untouched across probes
    return dot(sub_bands > 1 ? subspectral_norm(x, p, true) : batch_norm(x, p, true),
               probe);
  };

  NormParams<double> p = params;
  NormCache<double> cache;
  sub_bands > 1 ? subspectral_norm(x, p, true, &cache) : batch_norm(x, p, true, &cache);
  TensorD gx;
  norm_backward(x, p, cache, probe, &gx);
  h.check(name, objective, x.data, gx.data);
  h.check(name, objective, params.gamma.data, p.gamma.grad);
  h.check(name, objective, params.beta.data, p.beta.grad);
}

void check_activation(Harness& h, uint64_t seed, const std::string& name) {
  Rng rng = make_rng(0xAC7, seed, std::hash<std::string>{}(name));
  TensorD x = random_tensor(2, 3, 4, 5, rng, -2.0, 2.0);
  if (name == "relu")  // keep probes away from the kink at zero
    for (auto& v : x.data)
      if (std::abs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
  const TensorD probe = random_tensor(2, 3, 4, 5, rng);

  const auto forward = [&](const TensorD& in) {
    if (name == "swish") return swish(in);
    if (name == "relu") return relu(in);
    return sigmoid(in);
  };
  const auto objective = [&] { return dot(forward(x), probe); };

  TensorD ga;
  if (name == "swish") {
    ga = swish_backward(x, probe);
    if (h.opt.corrupt_swish)
      for (auto& v : ga.data) v *= 1.05;  // deliberately wrong derivative
  } else if (name == "relu") {
    ga = relu_backward(x, probe);
  } else {
    ga = sigmoid_backward(x, probe);
  }
  h.check(name, objective, x.data, ga.data);
}

void check_pool(Harness& h, uint64_t seed, const std::string& name) {
  Rng rng = make_rng(0x9001, seed, std::hash<std::string>{}(name));
  TensorD x = random_tensor(2, 3, 6, 5, rng);
  if (name == "max_pool_freq") {
    // Separate column competitors so the FD probe cannot flip the argmax.
    for (int n = 0; n < x.n; ++n)
      for (int c = 0; c < x.c; ++c)
        for (int w = 0; w < x.w; ++w) {
          int best = 0;
          for (int y = 1; y < x.h; ++y)
            if (x.at(n, c, y, w) > x.at(n, c, best, w)) best = y;
          x.at(n, c, best, w) += 0.1;
        }
  }

  Rng probe_rng = make_rng(0x9002, seed, std::hash<std::string>{}(name));
  if (name == "avg_pool_freq") {
    const TensorD probe = random_tensor(2, 3, 1, 5, probe_rng);
    const auto objective = [&] { return dot(avg_pool_freq(x), probe); };
    const TensorD ga = avg_pool_freq_backward(x.h, probe);
    h.check(name, objective, x.data, ga.data);
  } else if (name == "max_pool_freq") {
    const TensorD probe = random_tensor(2, 3, 1, 5, probe_rng);
    std::vector<int> argmax;
    max_pool_freq(x, &argmax);
    const auto objective = [&] { return dot(max_pool_freq(x), probe); };
    const TensorD ga = max_pool_freq_backward(argmax, x.h, probe);
    h.check(name, objective, x.data, ga.data);
  } else if (name == "avg_pool_time") {
    const TensorD probe = random_tensor(2, 3, 6, 1, probe_rng);
    const auto objective = [&] { return dot(avg_pool_time(x), probe); };
    const TensorD ga = avg_pool_time_backward(x.w, probe);
    h.check(name, objective, x.data, ga.data);
  } else {  // broadcast_freq
    TensorD row = random_tensor(2, 3, 1, 5, rng);
    const TensorD probe = random_tensor(2, 3, 6, 5, probe_rng);
    const auto objective = [&] { return dot(broadcast_freq(row, 6), probe); };
    const TensorD ga = broadcast_freq_backward(probe);
    h.check(name, objective, row.data, ga.data);
  }
}

void check_dropout(Harness& h, uint64_t seed) {
  Rng data_rng = make_rng(0xD20, seed);
  TensorD x = random_tensor(3, 4, 2, 5, data_rng);
  const TensorD probe = random_tensor(3, 4, 2, 5, data_rng);
  const uint64_t mask_seed = mix_seed(0xD21, seed);

  // A fresh generator per call keeps the mask identical across probes.
  const auto objective = [&] {
    Rng rng = make_rng(mask_seed);
    return dot(channel_dropout(x, 0.4, rng, true), probe);
  };
  Rng rng = make_rng(mask_seed);
  std::vector<double> mask;
  channel_dropout(x, 0.4, rng, true, &mask);
  const TensorD ga = channel_dropout_backward(mask, probe);
  h.check("channel_dropout", objective, x.data, ga.data);
}

void check_cross_entropy(Harness& h, uint64_t seed) {
  Rng rng = make_rng(0xCE, seed);
  TensorD logits = random_tensor(3, 12, 1, 1, rng, -2.0, 2.0);
  std::vector<int> labels(3);
  std::uniform_int_distribution<int> label_dist(0, 11);
  for (auto& l : labels) l = label_dist(rng);

  const auto objective = [&] { return cross_entropy(logits, labels).first; };
  const TensorD ga = cross_entropy(logits, labels).second;
  h.check("cross_entropy", objective, logits.data, ga.data);
}

void check_block(Harness& h, uint64_t seed, bool transition) {
  Rng rng = make_rng(0xB10C, seed, transition);
  BlockConfig cfg;
  cfg.ssn_sub_bands = 5;
  cfg.dropout_p = 0.0;  // keep the objective deterministic
  if (transition) {
    cfg.in_channels = 6;
    cfg.out_channels = 10;
    cfg.stride_h = 2;
    cfg.temporal_dilation = 2;
  } else {
    cfg.in_channels = 8;
    cfg.out_channels = 8;
    cfg.temporal_dilation = 4;
  }
  const std::string name = transition ? "block_transition" : "block_normal";
  const int in_h = transition ? 9 : 5;  // post-stride heights divide S=5
  const double step = h.opt.block_step;
  BlockParams<double> params = BlockParams<double>::init(cfg, rng);

  // Transition blocks pass the input through a ReLU; a pre-activation
  // value within reach of a finite-difference probe makes the numeric
  // slope meaningless at the kink, so resample the input until every
  // such value keeps a wide margin.  Normal blocks are smooth end to end
  // and accept the first draw.
  TensorD x;
  for (int attempt = 0;; ++attempt) {
    x = random_tensor(2, cfg.in_channels, in_h, 6, rng);
    if (!transition) break;
    BlockParams<double> p = params;
    BlockCache<double> cache;
    Rng r = make_rng(0);
    block_forward(x, p, cfg, r, true, &cache);
    double min_abs = std::numeric_limits<double>::infinity();
    for (double v : cache.front_norm.data) min_abs = std::min(min_abs, std::abs(v));
    if (min_abs > 64.0 * step) break;
    if (attempt >= 100)
      throw TrainingError(name + ": no input clear of the ReLU kink");
  }

  Rng drop = make_rng(0);
  const TensorD probe = [&] {
    BlockParams<double> p = params;
    const TensorD y = block_forward(x, p, cfg, drop, true);
    Rng wr = make_rng(0x90B4, seed, transition);
    return random_tensor(y.n, y.c, y.h, y.w, wr);
  }();
  const auto objective = [&] {
    BlockParams<double> p = params;  // running stats reset per probe
    Rng r = make_rng(0);
    return dot(block_forward(x, p, cfg, r, true), probe);
  };

  BlockParams<double> p = params;
  BlockCache<double> cache;
  Rng r = make_rng(0);
  block_forward(x, p, cfg, r, true, &cache);
  const TensorD gx = block_backward(p, cfg, cache, probe);

  h.check_at(name, objective, x.data, gx.data, step);
  const auto check_param = [&](std::vector<double>& storage,
                               const std::vector<double>& analytic) {
    h.check_at(name, objective, storage, analytic, step);
  };
  if (transition) {
    check_param(params.front_pw.weight.data, p.front_pw.weight.grad);
    check_param(params.front_bn.gamma.data, p.front_bn.gamma.grad);
    check_param(params.front_bn.beta.data, p.front_bn.beta.grad);
  }
  check_param(params.f2_dw.weight.data, p.f2_dw.weight.grad);
  check_param(params.f2_ssn.gamma.data, p.f2_ssn.gamma.grad);
  check_param(params.f2_ssn.beta.data, p.f2_ssn.beta.grad);
  check_param(params.f1_dw.weight.data, p.f1_dw.weight.grad);
  check_param(params.f1_bn.gamma.data, p.f1_bn.gamma.grad);
  check_param(params.f1_bn.beta.data, p.f1_bn.beta.grad);
  check_param(params.f1_pw.weight.data, p.f1_pw.weight.grad);
}

}  // namespace

std::vector<GradCheckResult> run_gradchecks(const GradCheckOptions& opt) {
  Harness h{opt, {}};
  for (int s = 0; s < opt.n_seeds; ++s) {
    const uint64_t seed = static_cast<uint64_t>(s);
    check_conv(h, seed, /*grouped=*/false);
    check_conv(h, seed, /*grouped=*/true);
    check_norm(h, seed, /*sub_bands=*/1);
    check_norm(h, seed, /*sub_bands=*/5);
    check_activation(h, seed, "swish");
    check_activation(h, seed, "relu");
    check_activation(h, seed, "sigmoid");
    check_pool(h, seed, "avg_pool_freq");
    check_pool(h, seed, "max_pool_freq");
    check_pool(h, seed, "avg_pool_time");
    check_pool(h, seed, "broadcast_freq");
    check_dropout(h, seed);
    check_cross_entropy(h, seed);
    check_block(h, seed, /*transition=*/false);
    check_block(h, seed, /*transition=*/true);
  }
  return h.results;
}

bool all_pass(const std::vector<GradCheckResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const GradCheckResult& r) { return r.pass; });
}

}  // namespace bcres
