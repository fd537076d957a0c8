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

// Training: softmax cross-entropy, warmup + cosine learning-rate
// schedule, the SGD loop with per-epoch JSONL metrics, and top-1
// evaluation.

#ifndef BCRES_TRAINER_HPP_
#define BCRES_TRAINER_HPP_

#include <string>
#include <utility>
#include <vector>

#include "bcres/dataset.hpp"
#include "bcres/model.hpp"

namespace bcres {

struct ScheduleConfig {
  double total_epochs = 200.0;
  double warmup_epochs = 5.0;
  double peak_lr = 0.1;
  double floor_lr = 0.0;

  /// Linear warmup from zero to peak over the first warmup_epochs, then
  /// cosine decay to floor_lr; continuous at the boundary. `progress` is
  /// in fractional epochs, evaluated per optimizer step.
  double lr_at(double progress_epochs) const;

  /// Same shape compressed to `total` epochs: the warmup keeps its
  /// fraction of the run (5/200 by default).
  ScheduleConfig scaled_to(double total) const;
};

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 0.001;  // applied to convolution weights only
};

struct TrainConfig {
  int epochs = 200;
  uint64_t seed = 0;
  ScheduleConfig schedule;
  SgdConfig sgd;
  std::string out_dir;        // metrics.jsonl, best.ckpt, final.ckpt land here
  bool deterministic = true;  // logs wall_time_s as 0 so reruns match bitwise
  bool echo = false;          // mirror per-epoch metrics to stdout
};

/// Mean of -log softmax(logits)[label] over the batch, and the logit
/// gradient (softmax - onehot) / n. Logits are (n, classes, 1, 1).
template <typename T>
std::pair<T, Tensor<T>> cross_entropy(const Tensor<T>& logits,
                                      const std::vector<int>& labels);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;  // at the first step of the epoch
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double wall_time_s = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double best_val_acc = 0.0;
  int best_epoch = -1;
  std::string best_path, final_path, metrics_path;
};

/// The full loop: per epoch, shuffled batches -> forward -> loss ->
/// backward -> SGD with lr_at evaluated at fractional-epoch resolution,
/// then a validation pass. Saves the best-validation checkpoint (ties go
/// to the later epoch) and the final one. Non-finite loss raises
/// TrainingError naming the batch and learning rate.
TrainResult train(Model<float>& model, const BatchStream& train_stream,
                  const BatchStream& val_stream, const TrainConfig& cfg);

/// Top-1 accuracy, eval mode; argmax ties go to the lowest class index.
double evaluate(Model<float>& model, const BatchStream& stream);

}  // namespace bcres

#endif  // BCRES_TRAINER_HPP_
