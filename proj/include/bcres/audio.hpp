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

// Audio frontend: WAV input, log-Mel spectrograms, and the three
// training-time augmentations (time shift, background-noise mixing,
// spectrogram masking).

#ifndef BCRES_AUDIO_HPP_
#define BCRES_AUDIO_HPP_

#include <complex>
#include <string>
#include <vector>

#include "bcres/common.hpp"
#include "bcres/tensor.hpp"

namespace bcres {

inline constexpr int kSampleRate = 16000;
inline constexpr int kClipSamples = 16000;  // one second
inline constexpr int kFrameLen = 480;       // 30 ms
inline constexpr int kFrameHop = 160;       // 10 ms
inline constexpr int kFftSize = 512;        // next power of two >= kFrameLen
inline constexpr int kNumMels = 40;
inline constexpr double kMelFmin = 20.0;
inline constexpr double kMelFmax = 8000.0;
inline constexpr double kLogFloor = 1e-6;  // applied before the natural log

/// kClipSamples frames at kFrameHop: 1 + (16000 - 480) / 160.
inline constexpr int kNumFrames = 1 + (kClipSamples - kFrameLen) / kFrameHop;

struct Waveform {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate = kSampleRate;
};

/// Strict reader: 16-bit PCM, mono, 16 kHz; unknown RIFF chunks are
/// skipped (with odd-size padding). Anything else raises IoError.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

/// Zero-pads short clips to `length` samples; truncates longer ones.
Waveform fit_to_length(const Waveform& w, int length = kClipSamples);

/// In-place iterative radix-2 FFT; a.size() must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

/// Triangular filters on the HTK mel scale (2595 * log10(1 + f/700)),
/// tiling [fmin, fmax]. `weights` is n_mels x n_bins row-major with
/// n_bins = fft_size/2 + 1.
struct MelFilterbank {
  int n_mels = 0;
  int n_bins = 0;
  std::vector<float> weights;
  std::vector<double> center_hz;  // per-filter peak frequency

  float at(int mel, int bin) const { return weights[static_cast<size_t>(mel) * n_bins + bin]; }

  static MelFilterbank make(int n_mels = kNumMels, int fft_size = kFftSize,
                            double sample_rate = kSampleRate, double fmin = kMelFmin,
                            double fmax = kMelFmax);
};

/// Waveform -> (1, 1, kNumMels, frames) log-Mel spectrogram: 480-sample
/// frames every 160 samples, periodic Hann window, 512-point FFT
/// magnitude, mel filterbank, natural log with a kLogFloor floor.
/// Deterministic; a 16000-sample input yields 98 frames.
Tensor<float> log_mel(const Waveform& w);

/// Displaces samples by round(shift_ms * 16) positions (positive =
/// later), zero-filling the vacated region. |shift_ms| <= 100.
Waveform time_shift(const Waveform& w, double shift_ms);
/// Draws shift_ms ~ Uniform[-max_shift_ms, max_shift_ms] (one draw).
Waveform time_shift_random(const Waveform& w, double max_shift_ms, Rng& rng);

/// Deterministic mixing core: clip(w + alpha * noise[crop_start ..]) to
/// [-1, 1]. The noise clip must cover crop_start + len(w) samples.
Waveform mix_background_at(const Waveform& w, const Waveform& noise, int crop_start,
                           float alpha);
/// With probability `prob`: a random 1-s crop of `noise` is mixed in with
/// alpha ~ Uniform[0, 0.1]. Draw order: gate ~ Uniform[0,1) first (only
/// when prob > 0), then crop start ~ UniformInt, then alpha.
Waveform mix_background(const Waveform& w, const Waveform& noise, Rng& rng,
                        double prob = 0.8);

struct SpecAugmentConfig {
  int freq_mask_param = 0;  // F: mask widths drawn from {0..F}
  int time_mask_param = 20;  // T: likewise
  int n_freq_masks = 2;
  int n_time_masks = 2;
  bool enabled = true;
};

/// Zeroes n_freq_masks frequency bands then n_time_masks time bands.
/// Per mask, in order: width ~ UniformInt{0..param}, then start ~
/// UniformInt{0..extent-width}. Requires F <= n_mels and T <= frames.
void spec_augment(Tensor<float>& spec, const SpecAugmentConfig& cfg, Rng& rng);

/// Spectrogram dump format: rows u32, cols u32, then row-major float32,
/// all little-endian.
void write_feat(const std::string& path, const Tensor<float>& spec);
Tensor<float> read_feat(const std::string& path);

}  // namespace bcres

#endif  // BCRES_AUDIO_HPP_
