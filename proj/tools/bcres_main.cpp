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

// bcres: broadcasted-residual keyword spotting from the command line.
//
//   count      per-layer parameter and multiply table for a given tau
//   train      train on the speech-commands layout or the synthetic
//              micro fixture; writes metrics.jsonl / best.ckpt / final.ckpt
//   eval       top-1 accuracy of a checkpoint on a dataset split
//   gradcheck  64-bit finite-difference verification of every backward
//   featdump   WAV -> binary log-Mel feature file
//
// Exit codes: 0 success, 1 verification/training failure, 2 usage or
// environment error.

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bcres/audio.hpp"
#include "bcres/dataset.hpp"
#include "bcres/gradcheck.hpp"
#include "bcres/model.hpp"
#include "bcres/trainer.hpp"

namespace {

using namespace bcres;

// Sub-stream tags hashed with the user seed so the model init, the data
// pipeline, and the dataset rebalance draw from unrelated generators.
constexpr uint64_t kInitStream = 0x696e6974;       // "init"
constexpr uint64_t kPipelineStream = 0x70697065;   // "pipe"
constexpr uint64_t kRebalanceStream = 0x72656261;  // "reba"

// SpecAugment frequency-mask defaults per width multiplier; wider models
// tolerate (and need) stronger masking. Applied by nearest tau.
struct FreqMaskDefault {
  double tau;
  int param;
};
constexpr FreqMaskDefault kFreqMaskDefaults[] = {{1.0, 0},  {1.5, 1}, {2.0, 3},
                                                 {3.0, 5},  {6.0, 7}, {8.0, 7}};

int default_freq_mask(double tau) {
  const FreqMaskDefault* best = &kFreqMaskDefaults[0];
  for (const auto& d : kFreqMaskDefaults)
    if (std::abs(d.tau - tau) < std::abs(best->tau - tau)) best = &d;
  return best->param;
}

struct DatasetBundle {
  int n_classes = 0;
  std::vector<Example> train, val, test;
  std::function<Waveform(const Example&)> loader;
  std::vector<Waveform> backgrounds;
};

/// `spec` is either the literal "micro" (synthetic 4-class fixture) or a
/// speech-commands root directory. `seed` drives the rebalance draw and
/// the fixture synthesis.
DatasetBundle open_dataset(const std::string& spec, uint64_t seed) {
  DatasetBundle b;
  if (spec == "micro") {
    auto fixture = std::make_shared<MicroFixture>(MicroFixture::make(seed));
    b.n_classes = MicroFixture::kClasses;
    b.train = fixture->train;
    b.val = fixture->val;
    b.test = fixture->test;
    b.loader = [fixture](const Example& ex) { return fixture->waveform(ex); };
    return b;
  }
  if (!std::filesystem::is_directory(spec))
    throw IoError("dataset root not found: " + spec);
  Manifest m = load_manifest(spec);
  Rng rng = make_rng(mix_seed(seed, kRebalanceStream));
  m = rebalance(m, rng);
  b.n_classes = kNumClasses;
  b.train = split_of(m, Split::train);
  b.val = split_of(m, Split::val);
  b.test = split_of(m, Split::test);
  auto source = std::make_shared<DiskSource>(m.root, m.background_paths);
  b.loader = [source](const Example& ex) { return (*source)(ex); };
  b.backgrounds = source->backgrounds();
  return b;
}

BatchStream make_stream(const DatasetBundle& b, const std::vector<Example>& examples,
                        const PipelineConfig& cfg, int batch_size) {
  return BatchStream(examples, b.loader, cfg.augment ? b.backgrounds
                                                     : std::vector<Waveform>{},
                     cfg, batch_size);
}

int cmd_count(double tau, int frames, int n_classes) {
  ModelConfig cfg;
  cfg.tau = tau;
  cfg.n_classes = n_classes;
  const CostReport report = count_costs(cfg, frames);
  std::printf("%-24s %12s %14s\n", "layer", "params", "mults");
  for (const auto& line : report.lines)
    std::printf("%-24s %12" PRId64 " %14" PRIu64 "\n", line.name.c_str(), line.params,
                line.mults);
  std::printf("%-24s %12" PRId64 " %14" PRIu64 "\n", "total", report.params,
              report.mults);
  std::printf("tau %g, %d frames: %.1fk params, %.1fM mults\n", tau, frames,
              report.params / 1e3, report.mults / 1e6);
  return 0;
}

struct TrainArgs {
  std::string dataset;
  std::string out_dir;
  double tau = 1.0;
  int epochs = 200;
  int batch = 100;
  uint64_t seed = 0;
  std::string reduce = "avg";
  std::string combine = "add";
  int freq_mask = -1;  // -1: per-tau default
  int time_mask = 20;
  bool no_augment = false;
  bool wall_clock = false;
  bool quiet = false;
};

ModelConfig model_config_from(const TrainArgs& a, int n_classes) {
  ModelConfig cfg;
  cfg.tau = a.tau;
  cfg.n_classes = n_classes;
  cfg.reduce_mode = a.reduce == "max" ? ReduceMode::max : ReduceMode::avg;
  cfg.combine_mode = a.combine == "attention" ? CombineMode::sigmoid_attention
                                              : CombineMode::broadcast_add;
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  const DatasetBundle data = open_dataset(a.dataset, a.seed);

  PipelineConfig train_pipe;
  train_pipe.augment = !a.no_augment;
  train_pipe.seed = mix_seed(a.seed, kPipelineStream);
  train_pipe.spec_augment.enabled = train_pipe.augment;
  train_pipe.spec_augment.freq_mask_param =
      a.freq_mask >= 0 ? a.freq_mask : default_freq_mask(a.tau);
  train_pipe.spec_augment.time_mask_param = a.time_mask;
  PipelineConfig eval_pipe;
  eval_pipe.seed = train_pipe.seed;

  const BatchStream train_stream = make_stream(data, data.train, train_pipe, a.batch);
  const BatchStream val_stream = make_stream(data, data.val, eval_pipe, a.batch);

  Rng init_rng = make_rng(mix_seed(a.seed, kInitStream));
  Model<float> model = Model<float>::build(model_config_from(a, data.n_classes), init_rng);

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.schedule = ScheduleConfig{}.scaled_to(a.epochs > 0 ? a.epochs : 1);
  cfg.out_dir = a.out_dir;
  cfg.deterministic = !a.wall_clock;
  cfg.echo = !a.quiet;

  std::printf("train: %d examples, %d val, %d classes, %" PRId64 " params\n",
              train_stream.size(), val_stream.size(), data.n_classes,
              model.param_count());
  const TrainResult result = train(model, train_stream, val_stream, cfg);
  if (result.best_epoch >= 0)
    std::printf("best val acc %.4f at epoch %d -> %s\n", result.best_val_acc,
                result.best_epoch, result.best_path.c_str());
  std::printf("final checkpoint -> %s\nmetrics -> %s\n", result.final_path.c_str(),
              result.metrics_path.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset,
             const std::string& split, double tau, bool tau_given, uint64_t seed,
             int batch) {
  Model<float> model = load_checkpoint(checkpoint);
  if (tau_given && model.cfg.tau != tau)
    throw ConfigError("checkpoint was built with tau " + std::to_string(model.cfg.tau) +
                      ", not " + std::to_string(tau));
  const DatasetBundle data = open_dataset(dataset, seed);
  if (data.n_classes != model.cfg.n_classes)
    throw ConfigError("checkpoint expects " + std::to_string(model.cfg.n_classes) +
                      " classes but the dataset has " + std::to_string(data.n_classes));
  const Split s = split_from_name(split);
  const std::vector<Example>& examples =
      s == Split::train ? data.train : (s == Split::val ? data.val : data.test);
  if (examples.empty()) throw ConfigError("split '" + split + "' is empty");
  PipelineConfig pipe;
  pipe.seed = mix_seed(seed, kPipelineStream);
  const BatchStream stream = make_stream(data, examples, pipe, batch);
  const double acc = evaluate(model, stream);
  std::printf("%s accuracy %.4f over %d examples\n", split.c_str(), acc, stream.size());
  return 0;
}

int cmd_gradcheck(const GradCheckOptions& opt) {
  const auto results = run_gradchecks(opt);
  for (const auto& r : results)
    std::printf("%-18s %.3e %s\n", r.name.c_str(), r.max_rel_err,
                r.pass ? "ok" : "FAIL");
  if (!all_pass(results)) {
    std::fprintf(stderr, "gradcheck: at least one check exceeded tolerance\n");
    return 1;
  }
  return 0;
}

int cmd_featdump(const std::string& wav_path, const std::string& out_path) {
  const Waveform w = fit_to_length(read_wav(wav_path));
  const Tensor<float> spec = log_mel(w);
  write_feat(out_path, spec);
  std::printf("%s: %d mel bins x %d frames -> %s\n", wav_path.c_str(), spec.h, spec.w,
              out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"broadcasted-residual keyword spotting"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "worker thread count")->check(CLI::PositiveNumber);

  auto* count = app.add_subcommand("count", "per-layer parameter and multiply table");
  double count_tau = 1.0;
  int count_frames = 100, count_classes = kNumClasses;
  count->add_option("--tau", count_tau, "width multiplier");
  count->add_option("--frames", count_frames, "input frame count")
      ->check(CLI::PositiveNumber);
  count->add_option("--classes", count_classes, "classifier outputs")
      ->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "train a model");
  TrainArgs ta;
  train->add_option("--dataset", ta.dataset, "'micro' or a speech-commands root")
      ->required();
  train->add_option("--out", ta.out_dir, "artifact directory")->required();
  train->add_option("--tau", ta.tau, "width multiplier");
  train->add_option("--epochs", ta.epochs, "training epochs")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--batch", ta.batch, "minibatch size")->check(CLI::PositiveNumber);
  train->add_option("--seed", ta.seed, "master seed");
  train->add_option("--reduce", ta.reduce, "frequency reduction: avg|max")
      ->check(CLI::IsMember({"avg", "max"}));
  train->add_option("--combine", ta.combine, "residual combine: add|attention")
      ->check(CLI::IsMember({"add", "attention"}));
  train->add_option("--freq-mask-param", ta.freq_mask,
                    "SpecAugment max frequency-mask width (default: per-tau)");
  train->add_option("--time-mask-param", ta.time_mask,
                    "SpecAugment max time-mask width");
  train->add_flag("--no-augment", ta.no_augment, "disable all training augmentation");
  train->add_flag("--wall-clock", ta.wall_clock,
                  "log real wall time (breaks bitwise rerun identity)");
  train->add_flag("--quiet", ta.quiet, "suppress per-epoch metric lines");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_dataset, eval_split = "test";
  double eval_tau = 0.0;
  uint64_t eval_seed = 0;
  int eval_batch = 100;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--dataset", eval_dataset, "'micro' or a speech-commands root")
      ->required();
  eval->add_option("--split", eval_split, "train|val|test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  auto* eval_tau_opt =
      eval->add_option("--tau", eval_tau, "expected width multiplier (cross-check)");
  eval->add_option("--seed", eval_seed, "rebalance/fixture seed");
  eval->add_option("--batch", eval_batch, "minibatch size")->check(CLI::PositiveNumber);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference verification");
  GradCheckOptions gopt;
  gradcheck->add_option("--seeds", gopt.n_seeds, "random seeds per check")
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", gopt.step, "op-level probe step");
  gradcheck->add_option("--block-step", gopt.block_step, "block-level probe step");
  gradcheck->add_option("--tol", gopt.tol, "max relative error");
  gradcheck->add_flag("--corrupt-swish", gopt.corrupt_swish,
                      "fault injection: corrupt the swish derivative");

  auto* featdump = app.add_subcommand("featdump", "WAV -> log-Mel feature file");
  std::string feat_wav, feat_out;
  featdump->add_option("wav", feat_wav, "input WAV (16 kHz mono PCM16)")->required();
  featdump->add_option("--out", feat_out, "output feature path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors are environment errors
  }

#ifdef _OPENMP
  omp_set_num_threads(workers);
#endif

  try {
    if (*count) return cmd_count(count_tau, count_frames, count_classes);
    if (*train) return cmd_train(ta);
    if (*eval)
      return cmd_eval(eval_ckpt, eval_dataset, eval_split, eval_tau,
                      eval_tau_opt->count() > 0, eval_seed, eval_batch);
    if (*gradcheck) return cmd_gradcheck(gopt);
    if (*featdump) return cmd_featdump(feat_wav, feat_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training error: %s\n", e.what());
    return 1;
  }
  return 2;
}
