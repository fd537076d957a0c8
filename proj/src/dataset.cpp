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

#include "bcres/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <unordered_set>

namespace bcres {

namespace fs = std::filesystem;

int label_from_word(const std::string& word) {
  for (size_t i = 0; i < kKeywords.size(); ++i)
    if (word == kKeywords[i]) return static_cast<int>(i) + 2;
  return kUnknownLabel;
}

std::string label_name(int label) {
  if (label == kSilenceLabel) return "_silence_";
  if (label == kUnknownLabel) return "_unknown_";
  if (label >= 2 && label < 2 + static_cast<int>(kKeywords.size()))
    return kKeywords[static_cast<size_t>(label - 2)];
  return "class" + std::to_string(label);  // micro-fixture and friends
}

int label_from_name(const std::string& name) {
  if (name == "_silence_") return kSilenceLabel;
  if (name == "_unknown_") return kUnknownLabel;
  for (size_t i = 0; i < kKeywords.size(); ++i)
    if (name == kKeywords[i]) return static_cast<int>(i) + 2;
  if (name.rfind("class", 0) == 0) return std::stoi(name.substr(5));
  throw IoError("manifest: unknown label name: " + name);
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw IoError("manifest: unknown split name: " + name);
}

namespace {

std::unordered_set<std::string> read_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: missing list file: " + path);
  std::unordered_set<std::string> set;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) set.insert(line);
  }
  return set;
}

}  // namespace

Manifest load_manifest(const std::string& root_dir) {
  const fs::path root(root_dir);
  if (!fs::is_directory(root))
    throw IoError("manifest: not a directory: " + root_dir);
  const auto val_list = read_list_file((root / "validation_list.txt").string());
  const auto test_list = read_list_file((root / "testing_list.txt").string());

  Manifest m;
  m.root = root_dir;
  for (const auto& dir_entry : fs::directory_iterator(root)) {
    if (!dir_entry.is_directory()) continue;
    const std::string word = dir_entry.path().filename().string();
    if (word == "_background_noise_") {
      for (const auto& f : fs::directory_iterator(dir_entry.path()))
        if (f.path().extension() == ".wav")
          m.background_paths.push_back(word + "/" + f.path().filename().string());
      continue;
    }
    if (!word.empty() && word[0] == '_') continue;
    const int label = label_from_word(word);
    for (const auto& f : fs::directory_iterator(dir_entry.path())) {
      if (f.path().extension() != ".wav") continue;
      const std::string rel = word + "/" + f.path().filename().string();
      Split split = Split::train;
      if (test_list.count(rel))
        split = Split::test;
      else if (val_list.count(rel))
        split = Split::val;
      m.entries.push_back({rel, label, split});
    }
  }
  // Directory iteration order is unspecified; sort for reproducibility.
  std::sort(m.entries.begin(), m.entries.end(),
            [](const Example& a, const Example& b) { return a.path < b.path; });
  std::sort(m.background_paths.begin(), m.background_paths.end());

  for (const Split s : {Split::train, Split::val, Split::test})
    if (split_of(m, s).empty())
      throw IoError("manifest: empty " + split_name(s) + " split under " + root_dir);
  return m;
}

std::vector<Example> make_silence(int count, Rng& rng, Split split) {
  std::vector<Example> out;
  out.reserve(static_cast<size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i)
    out.push_back({"_silence_:" + std::to_string(rng()), kSilenceLabel, split});
  return out;
}

namespace {

// Rebalances one split in place: unknowns subsampled to the keyword mean,
// silence synthesized to match.
void rebalance_split(std::vector<Example>& entries, Split split, Rng& rng) {
  std::vector<int64_t> keyword_counts(kKeywords.size(), 0);
  std::vector<size_t> unknown_at;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split != split) continue;
    if (entries[i].label >= 2)
      ++keyword_counts[static_cast<size_t>(entries[i].label - 2)];
    else if (entries[i].label == kUnknownLabel)
      unknown_at.push_back(i);
  }
  int64_t total = 0;
  for (const int64_t c : keyword_counts) total += c;
  if (total == 0)
    throw ConfigError("rebalance: no keyword examples in " + split_name(split) +
                      " split");
  const int target = static_cast<int>(std::llround(
      static_cast<double>(total) / static_cast<double>(keyword_counts.size())));

  if (static_cast<int>(unknown_at.size()) > target) {
    // Subsample without replacement: shuffle the slots, drop the tail.
    std::shuffle(unknown_at.begin(), unknown_at.end(), rng);
    std::vector<bool> drop(entries.size(), false);
    for (size_t i = static_cast<size_t>(target); i < unknown_at.size(); ++i)
      drop[unknown_at[i]] = true;
    std::vector<Example> kept;
    kept.reserve(entries.size());
    for (size_t i = 0; i < entries.size(); ++i)
      if (!drop[i]) kept.push_back(std::move(entries[i]));
    entries = std::move(kept);
  } else if (static_cast<int>(unknown_at.size()) < target) {
    std::cerr << "warning: only " << unknown_at.size() << " unknown examples in "
              << split_name(split) << " split (target " << target << "); keeping all\n";
  }

  const auto silence = make_silence(target, rng, split);
  entries.insert(entries.end(), silence.begin(), silence.end());
}

}  // namespace

Manifest rebalance(const Manifest& m, Rng& rng) {
  Manifest out = m;
  rebalance_split(out.entries, Split::train, rng);
  rebalance_split(out.entries, Split::val, rng);
  return out;
}

std::vector<Example> split_of(const Manifest& m, Split split) {
  std::vector<Example> out;
  for (const Example& e : m.entries)
    if (e.split == split) out.push_back(e);
  return out;
}

void export_csv(const Manifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("manifest: cannot open for writing: " + path);
  out << "path,label,split\n";
  for (const Example& e : m.entries)
    out << e.path << ',' << label_name(e.label) << ',' << split_name(e.split) << '\n';
  if (!out) throw IoError("manifest: write failed: " + path);
}

Manifest import_csv(const std::string& path, const std::string& root) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open: " + path);
  Manifest m;
  m.root = root;
  std::string line;
  if (!std::getline(in, line) || line.rfind("path,label,split", 0) != 0)
    throw IoError("manifest: missing CSV header in " + path);
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    const size_t c1 = line.find(',');
    const size_t c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw IoError("manifest: malformed CSV line " + std::to_string(lineno) + " in " +
                    path);
    Example e;
    e.path = line.substr(0, c1);
    e.label = label_from_name(line.substr(c1 + 1, c2 - c1 - 1));
    e.split = split_from_name(line.substr(c2 + 1));
    m.entries.push_back(std::move(e));
  }
  return m;
}

DiskSource::DiskSource(std::string root, const std::vector<std::string>& background_paths)
    : root_(std::move(root)) {
  backgrounds_.reserve(background_paths.size());
  for (const std::string& p : background_paths)
    backgrounds_.push_back(read_wav(root_ + "/" + p));
}

Waveform DiskSource::operator()(const Example& ex) const {
  if (ex.path.rfind("_silence_:", 0) == 0) {
    Rng rng = make_rng(std::stoull(ex.path.substr(10)));
    Waveform w;
    w.samples.assign(kClipSamples, 0.0f);
    if (backgrounds_.empty()) {
      static bool warned = false;
      if (!warned) {
        std::cerr << "warning: no background clips; silence examples are all-zero\n";
        warned = true;
      }
      return w;
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < 0.1) return w;  // pure zeros
    std::uniform_int_distribution<size_t> clip_dist(0, backgrounds_.size() - 1);
    const Waveform& clip = backgrounds_[clip_dist(rng)];
    if (clip.samples.size() < static_cast<size_t>(kClipSamples)) return w;
    std::uniform_int_distribution<int> start_dist(
        0, static_cast<int>(clip.samples.size()) - kClipSamples);
    const int start = start_dist(rng);
    const float gain = static_cast<float>(unit(rng));
    for (int i = 0; i < kClipSamples; ++i)
      w.samples[static_cast<size_t>(i)] =
          gain * clip.samples[static_cast<size_t>(start + i)];
    return w;
  }
  return fit_to_length(read_wav(root_ + "/" + ex.path));
}

namespace {

// Sum of `n` random-phase sinusoids with frequencies in [f_lo, f_hi].
void add_sinusoids(std::vector<float>& x, int n, double f_lo, double f_hi, double amp,
                   Rng& rng) {
  std::uniform_real_distribution<double> freq_dist(f_lo, f_hi);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  for (int s = 0; s < n; ++s) {
    const double f = freq_dist(rng);
    const double phi = phase_dist(rng);
    for (size_t i = 0; i < x.size(); ++i)
      x[i] += static_cast<float>(
          amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / kSampleRate +
                         phi));
  }
}

}  // namespace

MicroFixture MicroFixture::make(uint64_t seed) {
  MicroFixture fx;
  fx.seed = seed;
  for (int cls = 0; cls < kClasses; ++cls)
    for (int idx = 0; idx < kPerClass; ++idx) {
      Example e;
      e.path = "fixture:" + std::to_string(cls) + ":" + std::to_string(idx);
      e.label = cls;
      if (idx < 44) {
        e.split = Split::train;
        fx.train.push_back(e);
      } else if (idx < 54) {
        e.split = Split::val;
        fx.val.push_back(e);
      } else {
        e.split = Split::test;
        fx.test.push_back(e);
      }
    }
  return fx;
}

Waveform MicroFixture::waveform(const Example& ex) const {
  if (ex.path.rfind("fixture:", 0) != 0)
    throw ConfigError("fixture: not a fixture path: " + ex.path);
  const size_t colon = ex.path.find(':', 8);
  if (colon == std::string::npos)
    throw ConfigError("fixture: malformed path: " + ex.path);
  const int cls = std::stoi(ex.path.substr(8, colon - 8));
  const int idx = std::stoi(ex.path.substr(colon + 1));
  if (cls < 0 || cls >= kClasses || idx < 0 || idx >= kPerClass)
    throw ConfigError("fixture: out-of-range utterance: " + ex.path);

  Rng rng = make_rng(seed, static_cast<uint64_t>(cls), static_cast<uint64_t>(idx));
  std::uniform_real_distribution<double> amp_dist(0.3, 0.8);
  const double amp = amp_dist(rng);

  Waveform w;
  w.samples.assign(kClipSamples, 0.0f);
  switch (cls) {
    case 0:
      add_sinusoids(w.samples, 1, 220.0, 380.0, amp, rng);
      break;
    case 1:
      add_sinusoids(w.samples, 1, 650.0, 950.0, amp, rng);
      break;
    case 2: {  // linear up-chirp
      std::uniform_real_distribution<double> lo(1400.0, 1700.0), hi(2000.0, 2300.0);
      std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
      const double f0 = lo(rng), f1 = hi(rng), phi = phase_dist(rng);
      const double T = static_cast<double>(kClipSamples);
      for (int i = 0; i < kClipSamples; ++i) {
        const double t = static_cast<double>(i);
        const double phase =
            2.0 * std::numbers::pi * (f0 * t + (f1 - f0) * t * t / (2.0 * T)) /
            kSampleRate;
        w.samples[static_cast<size_t>(i)] = static_cast<float>(amp * std::sin(phase + phi));
      }
      break;
    }
    case 3:  // band-limited noise burst
      add_sinusoids(w.samples, 8, 3000.0, 5000.0, amp / 8.0, rng);
      break;
    default:
      break;
  }
  // A small noise floor so no class is spectrally empty off-band.
  std::uniform_real_distribution<float> floor_dist(-0.005f, 0.005f);
  for (auto& v : w.samples) v = std::clamp(v + floor_dist(rng), -1.0f, 1.0f);
  return w;
}

std::function<Waveform(const Example&)> MicroFixture::loader() const {
  return [fx = *this](const Example& ex) { return fx.waveform(ex); };
}

BatchStream::BatchStream(std::vector<Example> examples,
                         std::function<Waveform(const Example&)> loader,
                         std::vector<Waveform> backgrounds, PipelineConfig cfg,
                         int batch_size)
    : examples_(std::move(examples)),
      loader_(std::move(loader)),
      backgrounds_(std::move(backgrounds)),
      cfg_(cfg),
      batch_size_(batch_size) {
  if (examples_.empty()) throw ConfigError("batches: empty example list");
  if (batch_size_ <= 0) throw ConfigError("batches: batch size must be positive");
}

int BatchStream::num_batches() const {
  return static_cast<int>((examples_.size() + static_cast<size_t>(batch_size_) - 1) /
                          static_cast<size_t>(batch_size_));
}

std::vector<int> BatchStream::epoch_order(int epoch) const {
  std::vector<int> order(examples_.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  if (cfg_.augment) {
    Rng rng = make_rng(cfg_.seed, static_cast<uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

BatchStream::Batch BatchStream::batch(int epoch, int index) const {
  if (index < 0 || index >= num_batches())
    throw ConfigError("batches: index out of range");
  const std::vector<int> order = epoch_order(epoch);
  const size_t begin = static_cast<size_t>(index) * static_cast<size_t>(batch_size_);
  const size_t end = std::min(begin + static_cast<size_t>(batch_size_), order.size());
  const int n = static_cast<int>(end - begin);

  Batch out;
  out.specs = Tensor<float>(n, 1, kNumMels, kNumFrames);
  out.labels.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int ex_index = order[begin + static_cast<size_t>(i)];
    const Example& ex = examples_[static_cast<size_t>(ex_index)];
    out.labels[static_cast<size_t>(i)] = ex.label;

    Waveform w = fit_to_length(loader_(ex));
    Tensor<float> spec;
    if (cfg_.augment) {
      Rng rng = make_rng(cfg_.seed, static_cast<uint64_t>(epoch),
                         static_cast<uint64_t>(ex_index));
      w = time_shift_random(w, cfg_.time_shift_ms, rng);
      if (!backgrounds_.empty()) {
        std::uniform_int_distribution<size_t> clip_dist(0, backgrounds_.size() - 1);
        const Waveform& clip = backgrounds_[clip_dist(rng)];
        w = mix_background(w, clip, rng, cfg_.noise_prob);
      } else {
        static bool warned = false;
        if (!warned && cfg_.noise_prob > 0.0) {
          std::cerr << "warning: no background clips; skipping noise mixing\n";
          warned = true;
        }
      }
      spec = log_mel(w);
      spec_augment(spec, cfg_.spec_augment, rng);
    } else {
      spec = log_mel(w);
    }
    std::copy(spec.data.begin(), spec.data.end(),
              out.specs.data.begin() +
                  static_cast<int64_t>(i) * spec.size());
  }
  return out;
}

}  // namespace bcres
