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

// Analytic parameter and multiply counting. Deliberately self-contained:
// shapes are derived with closed-form arithmetic rather than by calling
// the conv kernels, so the instrumented-forward cross-check in the tests
// compares two genuinely independent code paths.

#include <string>

#include "bcres/model.hpp"

namespace bcres {

namespace {

int conv_out(int in, int k, int s, int p, int d) {
  return (in + 2 * p - d * (k - 1) - 1) / s + 1;
}

struct Counter {
  CostReport report;
  int64_t params = 0;
  uint64_t mults = 0;

  void line(const std::string& name, int64_t p, uint64_t m) {
    report.lines.push_back({name, p, m});
    params += p;
    mults += m;
  }
  // A convolution costs taps * in_channels_per_group multiplies per
  // output element; padding taps are included by construction of the
  // shape formula.
  void conv(const std::string& name, int in_c, int out_c, int kh, int kw, int groups,
            bool bias, int out_h, int out_w) {
    const int64_t cig = in_c / groups;
    const int64_t weights = static_cast<int64_t>(out_c) * cig * kh * kw;
    const uint64_t out_elems = static_cast<uint64_t>(out_c) * out_h * out_w;
    line(name, weights + (bias ? out_c : 0),
         out_elems * static_cast<uint64_t>(kh) * kw * cig);
  }
  // A normalization costs one multiply per element (the folded scale).
  void norm(const std::string& name, int channels, int sub_bands, int h, int w) {
    line(name, 2LL * sub_bands * channels, static_cast<uint64_t>(channels) * h * w);
  }
};

}  // namespace

CostReport count_costs(const ModelConfig& cfg, int frames) {
  if (frames < 1) throw ConfigError("cost: frames must be >= 1");
  Counter ctr;

  const int stem_c = scaled_width(kStemBaseWidth, cfg.tau);
  int h = conv_out(cfg.n_mels, 5, 2, 2, 1);
  const int w = frames;  // no layer strides or pads the time axis unevenly
  ctr.conv("stem.conv", 1, stem_c, 5, 5, 1, false, h, w);
  ctr.norm("stem.bn", stem_c, 1, h, w);

  int prev_c = stem_c;
  for (int stage = 0; stage < kNumStages; ++stage) {
    const int c = scaled_width(kStageBaseWidth[stage], cfg.tau);
    for (int i = 0; i < kStageBlocks[stage]; ++i) {
      const std::string p =
          "stage" + std::to_string(stage + 1) + ".block" + std::to_string(i);
      const int sh = i == 0 ? kStageStrideH[stage] : 1;
      const bool transition = prev_c != c || sh != 1;
      if (transition) {
        ctr.conv(p + ".front_pw", prev_c, c, 1, 1, 1, false, h, w);
        ctr.norm(p + ".front_bn", c, 1, h, w);
      }
      const int h2 = conv_out(h, 3, sh, 1, 1);
      ctr.conv(p + ".f2_dw", c, c, 3, 1, c, false, h2, w);
      ctr.norm(p + ".f2_ssn", c, cfg.ssn_sub_bands, h2, w);
      ctr.conv(p + ".f1_dw", c, c, 1, 3, c, false, 1, w);
      ctr.norm(p + ".f1_bn", c, 1, 1, w);
      ctr.conv(p + ".f1_pw", c, c, 1, 1, 1, false, 1, w);
      h = h2;
      prev_c = c;
    }
  }

  const int head_c = scaled_width(kHeadBaseWidth, cfg.tau);
  h = conv_out(h, 5, 1, 0, 1);
  ctr.conv("head.dw", prev_c, prev_c, 5, 5, prev_c, false, h, w);
  ctr.conv("head.pw", prev_c, head_c, 1, 1, 1, true, h, w);
  // Global time average pooling: no parameters, no counted multiplies.
  ctr.conv("classifier", head_c, cfg.n_classes, 1, 1, 1, true, h, 1);

  ctr.report.params = ctr.params;
  ctr.report.mults = ctr.mults;
  return ctr.report;
}

int64_t count_params(const ModelConfig& cfg) { return count_costs(cfg, 1).params; }

uint64_t count_mults(const ModelConfig& cfg, int frames) {
  return count_costs(cfg, frames).mults;
}

}  // namespace bcres
