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

#include "bcres/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "json.hpp"

namespace bcres {

namespace {

// Stream tag separating the per-step dropout RNG from the data pipeline.
constexpr uint64_t kDropoutStream = 0x64726f70;  // "drop"

int argmax_class(const Tensor<float>& logits, int row) {
  int best = 0;
  float best_v = logits.at(row, 0, 0, 0);
  for (int c = 1; c < logits.c; ++c) {
    const float v = logits.at(row, c, 0, 0);
    if (v > best_v) {  // strict: ties keep the lowest index
      best_v = v;
      best = c;
    }
  }
  return best;
}

}  // namespace

double ScheduleConfig::lr_at(double progress_epochs) const {
  if (progress_epochs < 0.0 || progress_epochs > total_epochs)
    throw ConfigError("schedule: progress out of range");
  if (warmup_epochs >= total_epochs)
    throw ConfigError("schedule: warmup must be shorter than the run");
  if (peak_lr <= 0.0) throw ConfigError("schedule: peak_lr must be positive");
  if (progress_epochs < warmup_epochs) return peak_lr * progress_epochs / warmup_epochs;
  const double t = (progress_epochs - warmup_epochs) / (total_epochs - warmup_epochs);
  return floor_lr + (peak_lr - floor_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

ScheduleConfig ScheduleConfig::scaled_to(double total) const {
  if (total <= 0.0) throw ConfigError("schedule: total epochs must be positive");
  ScheduleConfig s = *this;
  s.warmup_epochs = warmup_epochs * total / total_epochs;
  s.total_epochs = total;
  return s;
}

template <typename T>
std::pair<T, Tensor<T>> cross_entropy(const Tensor<T>& logits,
                                      const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.n)
    throw ConfigError("cross_entropy: label count does not match batch");
  const int n = logits.n;
  const int classes = logits.c;
  Tensor<T> grad(n, classes, 1, 1);
  T loss = 0;
  for (int i = 0; i < n; ++i) {
    const int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= classes)
      throw ConfigError("cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(classes) + " classes");
    T max_logit = logits.at(i, 0, 0, 0);
    for (int c = 1; c < classes; ++c) max_logit = std::max(max_logit, logits.at(i, c, 0, 0));
    T denom = 0;
    for (int c = 0; c < classes; ++c) denom += std::exp(logits.at(i, c, 0, 0) - max_logit);
    const T log_denom = std::log(denom);
    loss += -(logits.at(i, label, 0, 0) - max_logit - log_denom);
    for (int c = 0; c < classes; ++c) {
      const T p = std::exp(logits.at(i, c, 0, 0) - max_logit - log_denom);
      grad.at(i, c, 0, 0) = (p - (c == label ? T(1) : T(0))) / static_cast<T>(n);
    }
  }
  return {loss / static_cast<T>(n), std::move(grad)};
}

template std::pair<float, Tensor<float>> cross_entropy<float>(const Tensor<float>&,
                                                              const std::vector<int>&);
template std::pair<double, Tensor<double>> cross_entropy<double>(const Tensor<double>&,
                                                                 const std::vector<int>&);

double evaluate(Model<float>& model, const BatchStream& stream) {
  Rng unused = make_rng(0);  // eval mode never draws from it
  int64_t correct = 0, total = 0;
  for (int b = 0; b < stream.num_batches(); ++b) {
    const BatchStream::Batch batch = stream.batch(/*epoch=*/0, b);
    const Tensor<float> logits = model.forward(batch.specs, /*training=*/false, unused);
    for (int i = 0; i < logits.n; ++i) {
      correct += argmax_class(logits, i) == batch.labels[static_cast<size_t>(i)];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train(Model<float>& model, const BatchStream& train_stream,
                  const BatchStream& val_stream, const TrainConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.epochs < 0) throw ConfigError("train: epochs must be nonnegative");

  TrainResult result;
  std::ofstream metrics;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    result.metrics_path = cfg.out_dir + "/metrics.jsonl";
    result.final_path = cfg.out_dir + "/final.ckpt";
    metrics.open(result.metrics_path, std::ios::trunc);
    if (!metrics) throw IoError("train: cannot open " + result.metrics_path);
  }

  struct Slot {
    std::string name;
    Tensor<float>* param;
    bool decay;
    Tensor<float> velocity;
  };
  std::vector<Slot> slots;
  model.for_each_param([&](const std::string& name, Tensor<float>& t, bool decay) {
    slots.push_back({name, &t, decay, Tensor<float>(t.n, t.c, t.h, t.w)});
  });

  const int steps_per_epoch = train_stream.num_batches();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    int64_t correct = 0, seen = 0;

    for (int i = 0; i < steps_per_epoch; ++i) {
      const double progress =
          static_cast<double>(epoch) + static_cast<double>(i) / steps_per_epoch;
      const double lr = cfg.schedule.lr_at(progress);

      const BatchStream::Batch batch = train_stream.batch(epoch, i);
      Rng step_rng = make_rng(mix_seed(cfg.seed, kDropoutStream),
                              static_cast<uint64_t>(epoch), static_cast<uint64_t>(i));
      model.zero_grads();
      ModelCache<float> cache;
      const Tensor<float> logits = model.forward(batch.specs, /*training=*/true, step_rng,
                                                 &cache);
      auto [loss, glogits] = cross_entropy(logits, batch.labels);
      if (!std::isfinite(loss))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                            " batch " + std::to_string(i) + " (lr=" + std::to_string(lr) +
                            ")");
      model.backward(cache, glogits);
      for (Slot& s : slots)
        sgd_step(*s.param, s.velocity, static_cast<float>(lr),
                 static_cast<float>(cfg.sgd.momentum),
                 static_cast<float>(s.decay ? cfg.sgd.weight_decay : 0.0));
      ++model.step;

      loss_sum += static_cast<double>(loss) * logits.n;
      for (int r = 0; r < logits.n; ++r)
        correct += argmax_class(logits, r) == batch.labels[static_cast<size_t>(r)];
      seen += logits.n;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.lr = cfg.schedule.lr_at(static_cast<double>(epoch));
    em.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    em.train_acc = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    em.val_acc = evaluate(model, val_stream);
    em.wall_time_s =
        cfg.deterministic
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
                  .count();
    result.history.push_back(em);

    if (metrics.is_open()) {
      const nlohmann::json line = {{"epoch", em.epoch},           {"lr", em.lr},
                                   {"train_loss", em.train_loss}, {"train_acc", em.train_acc},
                                   {"val_acc", em.val_acc},       {"wall_time_s", em.wall_time_s}};
      metrics << line.dump() << '\n';
      metrics.flush();
    }
    if (cfg.echo)
      std::cout << "epoch " << em.epoch << " lr " << em.lr << " loss " << em.train_loss
                << " acc " << em.train_acc << " val " << em.val_acc << '\n';

    if (em.val_acc >= result.best_val_acc) {  // >=: ties go to the later epoch
      result.best_val_acc = em.val_acc;
      result.best_epoch = epoch;
      if (!cfg.out_dir.empty()) {
        result.best_path = cfg.out_dir + "/best.ckpt";
        save_checkpoint(model, result.best_path);
      }
    }
  }

  if (!cfg.out_dir.empty()) save_checkpoint(model, result.final_path);
  return result;
}

}  // namespace bcres
