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

#include "bcres/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace bcres {

namespace {

uint32_t read_u32le(std::istream& in) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

uint16_t read_u16le(std::istream& in) {
  uint8_t b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | b[1] << 8);
}

void write_u32le(std::ostream& out, uint32_t v) {
  const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                        static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16le(std::ostream& out, uint16_t v) {
  const uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("wav: cannot open: " + path);

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    throw IoError("wav: not a RIFF file: " + path);
  read_u32le(in);  // RIFF payload size; chunk sizes are trusted instead
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    throw IoError("wav: not a WAVE file: " + path);

  bool have_fmt = false;
  Waveform w;
  while (in.read(tag, 4)) {
    const uint32_t chunk_size = read_u32le(in);
    if (!in) throw IoError("wav: truncated chunk header: " + path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw IoError("wav: malformed fmt chunk: " + path);
      const uint16_t format = read_u16le(in);
      const uint16_t channels = read_u16le(in);
      const uint32_t rate = read_u32le(in);
      read_u32le(in);  // byte rate
      read_u16le(in);  // block align
      const uint16_t bits = read_u16le(in);
      if (format != 1) throw IoError("wav: only PCM supported: " + path);
      if (channels != 1) throw IoError("wav: only mono supported: " + path);
      if (rate != kSampleRate)
        throw IoError("wav: expected 16 kHz, got " + std::to_string(rate) + ": " + path);
      if (bits != 16) throw IoError("wav: only 16-bit samples supported: " + path);
      in.seekg(chunk_size - 16 + (chunk_size & 1), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IoError("wav: data chunk before fmt: " + path);
      const uint32_t n = chunk_size / 2;
      w.samples.resize(n);
      std::vector<uint8_t> raw(chunk_size);
      in.read(reinterpret_cast<char*>(raw.data()), chunk_size);
      if (!in) throw IoError("wav: truncated data chunk: " + path);
      for (uint32_t i = 0; i < n; ++i) {
        const int16_t s = static_cast<int16_t>(raw[2 * i] | raw[2 * i + 1] << 8);
        w.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      return w;
    } else {
      // Unknown chunk: skip payload plus the odd-size padding byte.
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw IoError("wav: no data chunk: " + path);
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("wav: cannot open for writing: " + path);
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size()) * 2;
  out.write("RIFF", 4);
  write_u32le(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32le(out, 16);
  write_u16le(out, 1);  // PCM
  write_u16le(out, 1);  // mono
  write_u32le(out, kSampleRate);
  write_u32le(out, kSampleRate * 2);  // byte rate
  write_u16le(out, 2);                // block align
  write_u16le(out, 16);               // bits
  out.write("data", 4);
  write_u32le(out, data_bytes);
  for (const float v : w.samples) {
    const float c = std::clamp(v, -1.0f, 1.0f);
    const int16_t s = static_cast<int16_t>(std::lrintf(c * 32767.0f));
    write_u16le(out, static_cast<uint16_t>(s));
  }
  if (!out) throw IoError("wav: write failed: " + path);
}

Waveform fit_to_length(const Waveform& w, int length) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(static_cast<size_t>(length), 0.0f);
  const size_t n = std::min<size_t>(w.samples.size(), static_cast<size_t>(length));
  std::copy_n(w.samples.begin(), n, out.samples.begin());
  return out;
}

void fft_radix2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw ConfigError("fft: size must be a power of two, got " + std::to_string(n));
  for (size_t i = 1, j = 0; i < n; ++i) {  // bit-reversal permutation
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

MelFilterbank MelFilterbank::make(int n_mels, int fft_size, double sample_rate,
                                  double fmin, double fmax) {
  if (n_mels <= 0 || fft_size <= 0 || fmin < 0 || fmax <= fmin ||
      fmax > sample_rate / 2.0)
    throw ConfigError("mel: invalid filterbank parameters");
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = fft_size / 2 + 1;
  fb.weights.assign(static_cast<size_t>(n_mels) * fb.n_bins, 0.0f);
  fb.center_hz.resize(n_mels);

  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    fb.center_hz[m] = center;
    for (int k = 0; k < fb.n_bins; ++k) {
      const double f = k * sample_rate / fft_size;
      double v = 0.0;
      if (f > left && f < center)
        v = (f - left) / (center - left);
      else if (f >= center && f < right)
        v = (right - f) / (right - center);
      fb.weights[static_cast<size_t>(m) * fb.n_bins + k] = static_cast<float>(v);
    }
  }
  return fb;
}

Tensor<float> log_mel(const Waveform& w) {
  if (w.samples.empty()) throw ConfigError("log_mel: empty waveform");
  static const MelFilterbank fb = MelFilterbank::make();
  static const std::vector<double> hann = [] {
    std::vector<double> win(kFrameLen);
    for (int i = 0; i < kFrameLen; ++i)
      win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / kFrameLen);
    return win;
  }();

  const int n = static_cast<int>(w.samples.size());
  const int frames = n >= kFrameLen ? 1 + (n - kFrameLen) / kFrameHop : 0;
  if (frames == 0) throw ConfigError("log_mel: waveform shorter than one frame");

  Tensor<float> spec(1, 1, fb.n_mels, frames);
  std::vector<std::complex<double>> buf(kFftSize);
  for (int t = 0; t < frames; ++t) {
    const int start = t * kFrameHop;
    for (int i = 0; i < kFrameLen; ++i)
      buf[i] = {static_cast<double>(w.samples[start + i]) * hann[i], 0.0};
    for (int i = kFrameLen; i < kFftSize; ++i) buf[i] = {0.0, 0.0};
    fft_radix2(buf);
    for (int m = 0; m < fb.n_mels; ++m) {
      double energy = 0.0;
      for (int k = 0; k < fb.n_bins; ++k) {
        const float wgt = fb.at(m, k);
        if (wgt != 0.0f) energy += wgt * std::abs(buf[k]);
      }
      spec.at(0, 0, m, t) = static_cast<float>(std::log(std::max(energy, kLogFloor)));
    }
  }
  return spec;
}

Waveform time_shift(const Waveform& w, double shift_ms) {
  if (std::abs(shift_ms) > 100.0)
    throw ConfigError("time_shift: |shift| must be <= 100 ms, got " +
                      std::to_string(shift_ms));
  const int n = static_cast<int>(w.samples.size());
  const int k = static_cast<int>(std::lround(shift_ms * kSampleRate / 1000.0));
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(static_cast<size_t>(n), 0.0f);
  for (int i = 0; i < n; ++i) {
    const int src = i - k;
    if (src >= 0 && src < n) out.samples[i] = w.samples[src];
  }
  return out;
}

Waveform time_shift_random(const Waveform& w, double max_shift_ms, Rng& rng) {
  std::uniform_real_distribution<double> dist(-max_shift_ms, max_shift_ms);
  return time_shift(w, dist(rng));
}

Waveform mix_background_at(const Waveform& w, const Waveform& noise, int crop_start,
                           float alpha) {
  const size_t n = w.samples.size();
  if (crop_start < 0 || crop_start + n > noise.samples.size())
    throw ConfigError("mix_background: noise clip too short for crop");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    out.samples[i] = std::clamp(
        w.samples[i] + alpha * noise.samples[static_cast<size_t>(crop_start) + i], -1.0f,
        1.0f);
  return out;
}

Waveform mix_background(const Waveform& w, const Waveform& noise, Rng& rng, double prob) {
  if (prob < 0.0 || prob > 1.0)
    throw ConfigError("mix_background: probability must be in [0, 1]");
  if (prob == 0.0) return w;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) >= prob) return w;
  if (noise.samples.size() < w.samples.size())
    throw ConfigError("mix_background: noise clip shorter than the waveform");
  const int max_start = static_cast<int>(noise.samples.size() - w.samples.size());
  std::uniform_int_distribution<int> start_dist(0, max_start);
  const int crop_start = start_dist(rng);
  std::uniform_real_distribution<double> alpha_dist(0.0, 0.1);
  const float alpha = static_cast<float>(alpha_dist(rng));
  return mix_background_at(w, noise, crop_start, alpha);
}

void spec_augment(Tensor<float>& spec, const SpecAugmentConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return;
  if (cfg.freq_mask_param < 0 || cfg.time_mask_param < 0)
    throw ConfigError("spec_augment: mask parameters must be nonnegative");
  if (cfg.freq_mask_param > spec.h)
    throw ConfigError("spec_augment: frequency mask parameter exceeds bin count");
  if (cfg.time_mask_param > spec.w)
    throw ConfigError("spec_augment: time mask parameter exceeds frame count");

  const auto mask_band = [&](int extent, int param, bool freq_axis) {
    std::uniform_int_distribution<int> width_dist(0, param);
    const int width = width_dist(rng);
    std::uniform_int_distribution<int> start_dist(0, extent - width);
    const int start = start_dist(rng);
    for (int in = 0; in < spec.n; ++in)
      for (int ic = 0; ic < spec.c; ++ic)
        for (int o = start; o < start + width; ++o)
          for (int p = 0; p < (freq_axis ? spec.w : spec.h); ++p) {
            if (freq_axis)
              spec.at(in, ic, o, p) = 0.0f;
            else
              spec.at(in, ic, p, o) = 0.0f;
          }
  };
  for (int i = 0; i < cfg.n_freq_masks; ++i)
    mask_band(spec.h, cfg.freq_mask_param, /*freq_axis=*/true);
  for (int i = 0; i < cfg.n_time_masks; ++i)
    mask_band(spec.w, cfg.time_mask_param, /*freq_axis=*/false);
}

void write_feat(const std::string& path, const Tensor<float>& spec) {
  if (spec.n != 1 || spec.c != 1)
    throw ConfigError("feat: expected a single-plane spectrogram, got " + spec.shape_str());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("feat: cannot open for writing: " + path);
  write_u32le(out, static_cast<uint32_t>(spec.h));
  write_u32le(out, static_cast<uint32_t>(spec.w));
  for (const float v : spec.data) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32le(out, bits);
  }
  if (!out) throw IoError("feat: write failed: " + path);
}

Tensor<float> read_feat(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("feat: cannot open: " + path);
  const uint32_t rows = read_u32le(in);
  const uint32_t cols = read_u32le(in);
  if (!in) throw IoError("feat: truncated header: " + path);
  if (rows == 0 || cols == 0 || rows > 1u << 20 || cols > 1u << 20)
    throw IoError("feat: implausible dimensions: " + path);
  Tensor<float> spec(1, 1, static_cast<int>(rows), static_cast<int>(cols));
  for (int64_t i = 0; i < spec.size(); ++i) {
    const uint32_t bits = read_u32le(in);
    if (!in) throw IoError("feat: truncated data: " + path);
    float v;
    std::memcpy(&v, &bits, 4);
    spec.data[static_cast<size_t>(i)] = v;
  }
  return spec;
}

}  // namespace bcres
