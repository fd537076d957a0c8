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
#include <cstdio>
#include <fstream>
#include <utility>
#include <vector>

#include "bcres/model.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bcres;
using testutil::bitwise_equal;
using testutil::random_tensor;
using testutil::TempDir;

namespace {

ModelConfig config_for(double tau) {
  ModelConfig cfg;
  cfg.tau = tau;
  return cfg;
}

Model<float> build_model(double tau, uint64_t seed = 1) {
  Rng rng = make_rng(seed);
  return Model<float>::build(config_for(tau), rng);
}

}  // namespace

TEST_CASE("scaled_width: half-up rounding and positivity guard") {
  CHECK(scaled_width(8, 1.0) == 8);
  CHECK(scaled_width(8, 1.5) == 12);
  CHECK(scaled_width(12, 1.5) == 18);
  CHECK(scaled_width(20, 0.05) == 1);  // floor(1.5) after the half-up shift
  CHECK(scaled_width(16, 2.5) == 40);
  CHECK_THROWS_AS(scaled_width(8, 0.05), ConfigError);  // rounds to zero
  CHECK_THROWS_AS(scaled_width(8, 0.0), ConfigError);
  CHECK_THROWS_AS(scaled_width(8, -1.0), ConfigError);
}

TEST_CASE("count_params: the width-multiplier family") {
  // Exact totals under this counting convention (all learnable scalars:
  // conv weights and biases, affine norm parameters).
  const std::vector<std::pair<double, int64_t>> family = {
      {1.0, 9200},   {1.5, 17106},  {2.0, 27220},
      {3.0, 54072},  {6.0, 187620}, {8.0, 320812},
  };
  // Rounded reference totals the family is expected to track within 3%.
  const std::vector<double> reference = {9.2e3, 17.2e3, 27.3e3, 54.2e3, 188e3, 321e3};
  for (size_t i = 0; i < family.size(); ++i) {
    const auto [tau, want] = family[i];
    const int64_t got = count_params(config_for(tau));
    CAPTURE(tau);
    CHECK(got == want);
    CHECK(std::abs(got - reference[i]) / reference[i] < 0.03);
  }
}

TEST_CASE("count_params: agrees with the parameters a built model holds") {
  for (const double tau : {1.0, 2.0}) {
    Model<float> model = build_model(tau);
    CHECK(model.param_count() == count_params(config_for(tau)));
  }
}

TEST_CASE("count_mults: frozen total and affine dependence on frames") {
  CHECK(count_mults(config_for(1.0), 100) == 2701984);
  CHECK(count_mults(config_for(1.0), 98) == 2647952);
  // Every layer's multiplies scale linearly with the frame count except
  // the classifier, which always runs on the single pooled column.
  for (const double tau : {1.0, 3.0}) {
    const ModelConfig cfg = config_for(tau);
    const uint64_t classifier_const =
        static_cast<uint64_t>(cfg.n_classes) * scaled_width(kHeadBaseWidth, tau);
    const uint64_t m50 = count_mults(cfg, 50) - classifier_const;
    const uint64_t m100 = count_mults(cfg, 100) - classifier_const;
    const uint64_t m200 = count_mults(cfg, 200) - classifier_const;
    CAPTURE(tau);
    CHECK(m100 == 2 * m50);
    CHECK(m200 == 2 * m100);
  }
}

TEST_CASE("count_mults: strictly monotone in the width multiplier") {
  uint64_t prev = 0;
  for (const double tau : {1.0, 1.5, 2.0, 3.0, 6.0, 8.0}) {
    const uint64_t m = count_mults(config_for(tau), 100);
    CHECK(m > prev);
    prev = m;
  }
}

TEST_CASE("count_costs: the instrumented forward reproduces the analytic count") {
  for (const double tau : {1.0, 3.0}) {
    for (const int frames : {98, 100}) {
      Model<float> model = build_model(tau);
      const Tensor<float> x = random_tensor<float>(1, 1, 40, frames, 201);
      Rng rng = make_rng(202);
      multcount::reset_and_enable();
      model.forward(x, /*training=*/false, rng);
      const uint64_t measured = multcount::read();
      multcount::disable();
      CAPTURE(tau);
      CAPTURE(frames);
      CHECK(measured == count_mults(config_for(tau), frames));
    }
  }
}

TEST_CASE("forward: visits the documented shape sequence on a 40x98 input") {
  Model<float> model = build_model(1.0);
  const Tensor<float> x = random_tensor<float>(1, 1, 40, 98, 211);
  Rng rng = make_rng(212);
  std::vector<std::pair<int, int>> trace;
  const Tensor<float> logits = model.forward(x, false, rng, nullptr, &trace);
  const std::vector<std::pair<int, int>> want = {
      {16, 20}, {8, 20}, {12, 10}, {16, 5}, {20, 5},
      {20, 1},  {32, 1}, {32, 1},  {12, 1},
  };
  CHECK(trace == want);
  CHECK(logits.n == 1);
  CHECK(logits.c == 12);
  CHECK(logits.h == 1);
  CHECK(logits.w == 1);
  for (const float v : logits.data) CHECK(std::isfinite(v));
}

TEST_CASE("forward: rejects inputs that do not match the config") {
  Model<float> model = build_model(1.0);
  Rng rng = make_rng(221);
  SUBCASE("wrong channel count") {
    const Tensor<float> x = random_tensor<float>(1, 2, 40, 98, 222);
    CHECK_THROWS_AS(model.forward(x, false, rng), ConfigError);
  }
  SUBCASE("wrong mel count") {
    const Tensor<float> x = random_tensor<float>(1, 1, 39, 98, 223);
    CHECK_THROWS_AS(model.forward(x, false, rng), ConfigError);
  }
}

TEST_CASE("backward: produces gradients for every parameter") {
  Model<float> model = build_model(1.0);
  const Tensor<float> x = random_tensor<float>(2, 1, 40, 98, 231);
  Rng rng = make_rng(232);
  ModelCache<float> cache;
  const Tensor<float> logits = model.forward(x, true, rng, &cache);
  const Tensor<float> glogits = random_tensor<float>(2, 12, 1, 1, 233);
  const Tensor<float> gx = model.backward(cache, glogits);
  CHECK(gx.same_shape(x));
  int params_with_grad = 0, named = 0;
  model.for_each_param([&](const std::string& name, Tensor<float>& t, bool) {
    ++named;
    if (t.has_grad()) ++params_with_grad;
    CHECK(t.has_grad());
    for (const float v : t.grad) CHECK(std::isfinite(v));
    CHECK(!name.empty());
  });
  CHECK(named == params_with_grad);
  CHECK(named > 40);  // stem + 12 blocks + head + classifier pieces
  model.zero_grads();
  model.for_each_param([&](const std::string&, Tensor<float>& t, bool) {
    for (const float v : t.grad) CHECK(v == 0.0f);
  });
}

TEST_CASE("for_each_param: weight decay marks convolution weights only") {
  Model<float> model = build_model(1.0);
  int decayed = 0, plain = 0;
  model.for_each_param([&](const std::string& name, Tensor<float>&, bool decay) {
    const bool is_conv_weight = name.find("weight") != std::string::npos;
    CHECK(decay == is_conv_weight);
    (decay ? decayed : plain)++;
  });
  CHECK(decayed > 0);
  CHECK(plain > 0);
}

TEST_CASE("build: two models from the same seed agree, different seeds differ") {
  Model<float> a = build_model(1.0, 31);
  Model<float> b = build_model(1.0, 31);
  Model<float> c = build_model(1.0, 32);
  CHECK(bitwise_equal(a.stem_conv.weight, b.stem_conv.weight));
  CHECK_FALSE(bitwise_equal(a.stem_conv.weight, c.stem_conv.weight));
  const Tensor<float> x = random_tensor<float>(1, 1, 40, 98, 233);
  Rng r1 = make_rng(0), r2 = make_rng(0);
  CHECK(bitwise_equal(a.forward(x, false, r1), b.forward(x, false, r2)));
}

TEST_CASE("checkpoint: round trip restores parameters, state, and step") {
  TempDir dir("ckpt");
  const std::string path = dir.path() + "/model.ckpt";
  Model<float> model = build_model(1.5, 41);
  // Touch the running statistics so state restoration is visible.
  const Tensor<float> x = random_tensor<float>(2, 1, 40, 98, 42);
  Rng rng = make_rng(43);
  model.forward(x, /*training=*/true, rng);
  model.step = 1234;
  save_checkpoint(model, path);

  Model<float> loaded = load_checkpoint(path);
  CHECK(loaded.cfg.tau == 1.5);
  CHECK(loaded.cfg.n_classes == 12);
  CHECK(loaded.step == 1234);
  bool all_equal = true;
  model.for_each_param([&](const std::string& name, Tensor<float>& t, bool) {
    loaded.for_each_param([&](const std::string& other, Tensor<float>& u, bool) {
      if (name == other) all_equal = all_equal && bitwise_equal(t, u);
    });
  });
  model.for_each_state([&](const std::string& name, Tensor<float>& t) {
    loaded.for_each_state([&](const std::string& other, Tensor<float>& u) {
      if (name == other) all_equal = all_equal && bitwise_equal(t, u);
    });
  });
  CHECK(all_equal);
  // Same logits from the restored model.
  Rng r1 = make_rng(0), r2 = make_rng(0);
  CHECK(bitwise_equal(model.forward(x, false, r1), loaded.forward(x, false, r2)));
}

TEST_CASE("checkpoint: corruption and truncation are rejected") {
  TempDir dir("ckpt_bad");
  const std::string path = dir.path() + "/model.ckpt";
  Model<float> model = build_model(1.0, 51);
  save_checkpoint(model, path);

  SUBCASE("a flipped payload byte fails the checksum") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    char byte;
    f.seekg(200);
    f.get(byte);
    byte = static_cast<char>(byte ^ 0x5a);
    f.seekp(200);
    f.put(byte);
    f.close();
    try {
      load_checkpoint(path);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }
  }
  SUBCASE("a truncated file is rejected") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("wrong magic is rejected") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write("NOPE", 4);
    out.close();
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("missing file is rejected") {
    CHECK_THROWS_AS(load_checkpoint(dir.path() + "/absent.ckpt"), IoError);
  }
}

TEST_CASE("checkpoint: variant configuration survives the round trip") {
  TempDir dir("ckpt_variant");
  const std::string path = dir.path() + "/model.ckpt";
  ModelConfig cfg = config_for(1.0);
  cfg.n_classes = 4;
  cfg.reduce_mode = ReduceMode::max;
  cfg.combine_mode = CombineMode::sigmoid_attention;
  Rng rng = make_rng(61);
  Model<float> model = Model<float>::build(cfg, rng);
  save_checkpoint(model, path);
  Model<float> loaded = load_checkpoint(path);
  CHECK(loaded.cfg.n_classes == 4);
  CHECK(loaded.cfg.reduce_mode == ReduceMode::max);
  CHECK(loaded.cfg.combine_mode == CombineMode::sigmoid_attention);
}
