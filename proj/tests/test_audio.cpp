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
#include <complex>
#include <fstream>
#include <numbers>
#include <vector>

#include "bcres/audio.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bcres;
using testutil::TempDir;

namespace {

Waveform sine(double freq_hz, double amp = 0.5, int samples = kClipSamples) {
  Waveform w;
  w.samples.resize(static_cast<size_t>(samples));
  for (int i = 0; i < samples; ++i)
    w.samples[static_cast<size_t>(i)] = static_cast<float>(
        amp * std::sin(2.0 * std::numbers::pi * freq_hz * i / kSampleRate));
  return w;
}

}  // namespace

TEST_CASE("log_mel: one second of audio yields 40 x 98") {
  CHECK(kNumFrames == 98);
  const Tensor<float> spec = log_mel(sine(440.0));
  CHECK(spec.n == 1);
  CHECK(spec.c == 1);
  CHECK(spec.h == kNumMels);
  CHECK(spec.w == kNumFrames);
}

TEST_CASE("log_mel: silence sits exactly on the log floor") {
  Waveform w;
  w.samples.assign(kClipSamples, 0.0f);
  const Tensor<float> spec = log_mel(w);
  const float floor_value = static_cast<float>(std::log(kLogFloor));
  for (const float v : spec.data) CHECK(v == floor_value);
  CHECK(floor_value == doctest::Approx(-13.8155).epsilon(1e-4));
}

TEST_CASE("log_mel: a pure tone peaks in the matching mel bin, every frame") {
  const MelFilterbank& fb = MelFilterbank::make(kNumMels, kFftSize / 2 + 1);
  // The filter whose center is nearest 1 kHz.
  int want_bin = 0;
  for (int m = 1; m < kNumMels; ++m)
    if (std::abs(fb.center_hz[static_cast<size_t>(m)] - 1000.0) <
        std::abs(fb.center_hz[static_cast<size_t>(want_bin)] - 1000.0))
      want_bin = m;
  const Tensor<float> spec = log_mel(sine(1000.0));
  for (int t = 0; t < spec.w; ++t) {
    int got = 0;
    for (int m = 1; m < kNumMels; ++m)
      if (spec.at(0, 0, m, t) > spec.at(0, 0, got, t)) got = m;
    CHECK(got == want_bin);
  }
}

TEST_CASE("mel filterbank: nonnegative triangles with rising centers") {
  const MelFilterbank& fb = MelFilterbank::make(kNumMels, kFftSize / 2 + 1);
  for (const double w : fb.weights) CHECK(w >= 0.0);
  for (int m = 0; m < kNumMels; ++m) {
    double sum = 0.0;
    for (int k = 0; k < fb.n_bins; ++k) sum += fb.at(m, k);
    CHECK(sum > 0.0);  // every filter covers at least one bin
    if (m > 0)
      CHECK(fb.center_hz[static_cast<size_t>(m)] >
            fb.center_hz[static_cast<size_t>(m - 1)]);
  }
  CHECK(fb.center_hz.front() >= kMelFmin);
  CHECK(fb.center_hz.back() <= kMelFmax);
}

TEST_CASE("fft: matches a naive DFT on random input") {
  Rng rng = make_rng(301);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const size_t n = 256;
  std::vector<std::complex<double>> a(n);
  for (auto& v : a) v = {dist(rng), dist(rng)};
  std::vector<std::complex<double>> naive(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> s = 0.0;
    for (size_t t = 0; t < n; ++t)
      s += a[t] * std::polar(1.0, -2.0 * std::numbers::pi *
                                      static_cast<double>(k * t % n) /
                                      static_cast<double>(n));
    naive[k] = s;
  }
  std::vector<std::complex<double>> fast = a;
  fft_radix2(fast);
  for (size_t k = 0; k < n; ++k) CHECK(std::abs(fast[k] - naive[k]) < 1e-9);
}

TEST_CASE("fft: rejects non-power-of-two sizes") {
  std::vector<std::complex<double>> a(100);
  CHECK_THROWS_AS(fft_radix2(a), ConfigError);
}

TEST_CASE("wav: PCM16 round trip within quantization error") {
  TempDir dir("wav");
  const std::string path = dir.path() + "/tone.wav";
  const Waveform w = sine(440.0, 0.7);
  write_wav(path, w);
  const Waveform back = read_wav(path);
  CHECK(back.sample_rate == kSampleRate);
  REQUIRE(back.samples.size() == w.samples.size());
  double max_err = 0.0;
  for (size_t i = 0; i < w.samples.size(); ++i)
    max_err = std::max(max_err,
                       std::abs(static_cast<double>(w.samples[i]) - back.samples[i]));
  CHECK(max_err < 1e-4);  // 16-bit step is ~3.1e-5
}

TEST_CASE("wav: malformed files are rejected") {
  TempDir dir("wav_bad");
  const std::string path = dir.path() + "/bad.wav";
  SUBCASE("missing file") { CHECK_THROWS_AS(read_wav(path), IoError); }
  SUBCASE("not a RIFF file") {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not audio";
    out.close();
    CHECK_THROWS_AS(read_wav(path), IoError);
  }
}

TEST_CASE("fit_to_length: pads short clips with zeros and crops long ones") {
  Waveform shorty;
  shorty.samples = {0.5f, -0.5f};
  const Waveform padded = fit_to_length(shorty, 5);
  CHECK(padded.samples == std::vector<float>{0.5f, -0.5f, 0.0f, 0.0f, 0.0f});
  Waveform longy;
  longy.samples = {1, 2, 3, 4, 5};
  const Waveform cropped = fit_to_length(longy, 3);
  CHECK(cropped.samples == std::vector<float>{1, 2, 3});
}

TEST_CASE("time_shift: moves samples and zero-fills the vacated edge") {
  Waveform w;
  w.samples = {1, 2, 3, 4};
  w.samples.resize(kClipSamples, 0.0f);
  // +1 ms = 16 samples later.
  const Waveform later = time_shift(w, 1.0);
  CHECK(later.samples[16] == 1.0f);
  CHECK(later.samples[0] == 0.0f);
  const Waveform earlier = time_shift(w, -1.0);
  CHECK(earlier.samples.back() == 0.0f);
  CHECK(time_shift(w, 0.0).samples == w.samples);
  CHECK_THROWS_AS(time_shift(w, 150.0), ConfigError);
  CHECK_THROWS_AS(time_shift(w, -150.0), ConfigError);
}

TEST_CASE("time_shift_random: stays within the configured window") {
  const Waveform w = sine(200.0, 0.4);
  Rng rng = make_rng(311);
  for (int i = 0; i < 10; ++i) {
    const Waveform shifted = time_shift_random(w, 100.0, rng);
    CHECK(shifted.samples.size() == w.samples.size());
  }
}

TEST_CASE("mix_background: blends a noise crop and clips to [-1, 1]") {
  Waveform w;
  w.samples.assign(8, 0.95f);
  Waveform noise;
  noise.samples.assign(16, 1.0f);
  const Waveform mixed = mix_background_at(w, noise, 4, 0.5f);
  for (const float v : mixed.samples) CHECK(v == 1.0f);  // 0.95 + 0.5 clipped
  const Waveform gentle = mix_background_at(w, noise, 0, 0.01f);
  for (const float v : gentle.samples) CHECK(v == doctest::Approx(0.96f));
}

TEST_CASE("mix_background: probability zero is the identity, no draws") {
  const Waveform w = sine(300.0, 0.2);
  const Waveform noise = sine(50.0, 0.2);
  Rng rng = make_rng(321);
  const Waveform out = mix_background(w, noise, rng, 0.0);
  CHECK(out.samples == w.samples);
  Rng fresh = make_rng(321);
  CHECK(rng() == fresh());
}

TEST_CASE("mix_background: probability one always mixes") {
  Waveform w;
  w.samples.assign(100, 0.0f);
  Waveform noise;
  noise.samples.assign(200, 0.5f);
  int changed = 0;
  Rng rng = make_rng(331);
  for (int i = 0; i < 20; ++i) {
    const Waveform out = mix_background(w, noise, rng, 1.0);
    bool any = false;
    for (const float v : out.samples) any = any || v != 0.0f;
    changed += any;
  }
  CHECK(changed >= 18);  // alpha ~ U[0, 0.1] is zero with probability zero
}

TEST_CASE("spec_augment: masks are bounded and disabled mode is identity") {
  Rng rng = make_rng(341);
  Tensor<float> spec = testutil::random_tensor<float>(1, 1, 40, 98, 342, 0.5f, 2.0f);
  SUBCASE("disabled leaves the spectrogram untouched") {
    Tensor<float> copy = spec;
    SpecAugmentConfig cfg;
    cfg.enabled = false;
    spec_augment(copy, cfg, rng);
    CHECK(testutil::bitwise_equal(copy, spec));
    Rng fresh = make_rng(341);
    CHECK(rng() == fresh());
  }
  SUBCASE("masked rows and columns stay within the configured budget") {
    Tensor<float> copy = spec;
    SpecAugmentConfig cfg;
    cfg.freq_mask_param = 5;
    cfg.time_mask_param = 10;
    spec_augment(copy, cfg, rng);
    int zero_rows = 0, zero_cols = 0;
    for (int h = 0; h < copy.h; ++h) {
      bool all = true;
      for (int w = 0; w < copy.w; ++w) all = all && copy.at(0, 0, h, w) == 0.0f;
      zero_rows += all;
    }
    for (int w = 0; w < copy.w; ++w) {
      bool all = true;
      for (int h = 0; h < copy.h; ++h) all = all && copy.at(0, 0, h, w) == 0.0f;
      zero_cols += all;
    }
    // The source has no zeros, so zeroed lines can only come from masks.
    CHECK(zero_rows <= 2 * 5);
    CHECK(zero_cols <= 2 * 10);
  }
  SUBCASE("zero mask widths leave everything in place") {
    Tensor<float> copy = spec;
    SpecAugmentConfig cfg;
    cfg.freq_mask_param = 0;
    cfg.time_mask_param = 0;
    spec_augment(copy, cfg, rng);
    CHECK(testutil::bitwise_equal(copy, spec));
  }
  SUBCASE("oversized mask parameters are rejected") {
    SpecAugmentConfig cfg;
    cfg.freq_mask_param = 41;
    CHECK_THROWS_AS(spec_augment(spec, cfg, rng), ConfigError);
  }
}

TEST_CASE("feat file: binary round trip is exact") {
  TempDir dir("feat");
  const std::string path = dir.path() + "/spec.feat";
  const Tensor<float> spec = log_mel(sine(700.0));
  write_feat(path, spec);
  const Tensor<float> back = read_feat(path);
  CHECK(testutil::bitwise_equal(back, spec));
  CHECK_THROWS_AS(read_feat(dir.path() + "/absent.feat"), IoError);
}
