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

// Dataset handling: the speech-commands directory layout with its
// validation/testing list files, 12-class relabeling with unknown/silence
// rebalancing, a synthetic micro-fixture for desk-scale tests, and the
// batching pipeline that feeds the trainer.

#ifndef BCRES_DATASET_HPP_
#define BCRES_DATASET_HPP_

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "bcres/audio.hpp"
#include "bcres/common.hpp"
#include "bcres/tensor.hpp"

namespace bcres {

// Label indices: 0 = silence, 1 = unknown, 2.. = the ten keywords below.
inline constexpr int kNumClasses = 12;
inline constexpr int kSilenceLabel = 0;
inline constexpr int kUnknownLabel = 1;
inline constexpr std::array<const char*, 10> kKeywords = {
    "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go"};

/// Keyword -> its index; any other word -> kUnknownLabel.
int label_from_word(const std::string& word);
std::string label_name(int label);
/// Inverse of label_name; IoError on unknown names.
int label_from_name(const std::string& name);

enum class Split { train, val, test };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

/// One utterance. `path` is either a WAV path relative to the dataset
/// root, or a synthetic-silence descriptor "_silence_:<seed>".
struct Example {
  std::string path;
  int label = 0;
  Split split = Split::train;
};

struct Manifest {
  std::string root;
  std::vector<Example> entries;
  std::vector<std::string> background_paths;  // _background_noise_ clips
};

/// Scans a speech-commands directory: word folders hold WAVs, files in
/// testing_list.txt / validation_list.txt go to those splits, everything
/// else to train; `_background_noise_` feeds the mixer instead of a
/// class. Entries come back sorted by path.
Manifest load_manifest(const std::string& root_dir);

/// Synthetic-silence examples; each carries its own sub-seed drawn from
/// `rng`, so realization is reproducible independent of load order.
std::vector<Example> make_silence(int count, Rng& rng, Split split);

/// Rebalances the train and val splits: unknowns are subsampled (without
/// replacement) to the mean keyword-class count, rounded to nearest, and
/// the same number of silence examples is synthesized. The test split
/// passes through untouched.
Manifest rebalance(const Manifest& m, Rng& rng);

std::vector<Example> split_of(const Manifest& m, Split split);

/// CSV with a "path,label,split" header; labels by name. Paths must not
/// contain commas (speech-commands paths never do).
void export_csv(const Manifest& m, const std::string& path);
Manifest import_csv(const std::string& path, const std::string& root);

/// Loads WAV examples from disk (padded to one second) and realizes
/// "_silence_:<seed>" descriptors: with probability 0.1 pure zeros, else
/// a random 1-s crop of a random background clip scaled by a uniform
/// [0,1] gain. Background clips are read once, up front.
class DiskSource {
 public:
  DiskSource(std::string root, const std::vector<std::string>& background_paths);
  Waveform operator()(const Example& ex) const;
  const std::vector<Waveform>& backgrounds() const { return backgrounds_; }

 private:
  std::string root_;
  std::vector<Waveform> backgrounds_;
};

/// A 4-class synthetic corpus: 64 one-second utterances per class with
/// disjoint spectral bands (low tone 220-380 Hz, mid tone 650-950 Hz,
/// rising chirp 1.4-2.3 kHz, and a 3-5 kHz noise burst), split 44/10/10
/// per class. Fully determined by `seed`.
struct MicroFixture {
  uint64_t seed = 0;
  std::vector<Example> train, val, test;

  static constexpr int kClasses = 4;
  static constexpr int kPerClass = 64;

  static MicroFixture make(uint64_t seed);
  /// Synthesizes the waveform for a "fixture:<class>:<idx>" path.
  Waveform waveform(const Example& ex) const;
  std::function<Waveform(const Example&)> loader() const;
};

struct PipelineConfig {
  bool augment = false;  // train pipeline: shift -> mix -> log_mel -> masks
  double time_shift_ms = 100.0;
  double noise_prob = 0.8;
  SpecAugmentConfig spec_augment;
  uint64_t seed = 0;
};

/// Deterministic, randomly-accessible batches. Epoch `e` shuffles the
/// example order with a generator seeded from (seed, e); each example's
/// augmentation stream is seeded from (seed, e, its index in the example
/// list), so batches can be produced in any order or in parallel and
/// still match a serial run bitwise.
class BatchStream {
 public:
  struct Batch {
    Tensor<float> specs;  // (n, 1, kNumMels, kNumFrames)
    std::vector<int> labels;
  };

  BatchStream(std::vector<Example> examples,
              std::function<Waveform(const Example&)> loader,
              std::vector<Waveform> backgrounds, PipelineConfig cfg, int batch_size);

  int size() const { return static_cast<int>(examples_.size()); }
  int batch_size() const { return batch_size_; }
  int num_batches() const;
  std::vector<int> epoch_order(int epoch) const;
  Batch batch(int epoch, int index) const;

 private:
  std::vector<Example> examples_;
  std::function<Waveform(const Example&)> loader_;
  std::vector<Waveform> backgrounds_;
  PipelineConfig cfg_;
  int batch_size_;
};

}  // namespace bcres

#endif  // BCRES_DATASET_HPP_
