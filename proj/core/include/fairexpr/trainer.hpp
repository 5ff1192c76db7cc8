// Copyright 2026 The fairexpr Authors
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

#ifndef FAIREXPR_TRAINER_HPP_
#define FAIREXPR_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairexpr/augmentation.hpp"
#include "fairexpr/checkpoint.hpp"
#include "fairexpr/fairness.hpp"
#include "fairexpr/losses.hpp"
#include "fairexpr/model.hpp"
#include "fairexpr/schema.hpp"

namespace fairexpr {

struct TrainConfig {
  int batch_size = 64;
  double initial_lr = 1e-3;
  double lr_decay_factor = 0.1;
  int lr_decay_every_epochs = 40;
  int max_epochs = 200;
  int early_stop_patience_epochs = 30;
  std::uint64_t seed = 0;
  HeadKind approach = HeadKind::baseline;
  double alpha = 1.0;
  AugmentConfig augment;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  static TrainConfig raf_defaults();
  /// Shorter schedule: decay every 2 epochs, patience 5.
  static TrainConfig celeba_defaults();
};

/// initial_lr * factor^floor(epoch / decay_every).
double learning_rate_at(const TrainConfig& cfg, int epoch);

/// Counts epochs whose monitor does not strictly improve on the best so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  /// Returns true when `monitor` is a new best.
  bool update(double monitor);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  double best() const noexcept { return best_; }
  int epochs_since_best() const noexcept { return since_best_; }

 private:
  int patience_;
  double best_ = -1.0;
  int since_best_ = 0;
  bool seen_ = false;
};

struct TrainState {
  int epoch = 0;
  std::int64_t step = 0;
  double current_lr = 0.0;
  double best_monitor_value = 0.0;
  int epochs_since_improvement = 0;
  std::string rng_state;
};

struct StepLogRow {
  std::int64_t step = 0;
  LossBreakdown loss;
};

struct EpochLogRow {
  int epoch = 0;
  /// Mean class-wise validation accuracy; nullopt without a validation set.
  std::optional<double> val_monitor;
  double lr = 0.0;
};

struct TrainingLog {
  std::vector<StepLogRow> steps;
  std::vector<EpochLogRow> epochs;
};

void write_step_log(const std::filesystem::path& path, const std::vector<StepLogRow>& rows);
void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochLogRow>& rows);

struct TrainHooks {
  /// Called before each optimisation step.
  std::function<void(std::int64_t step, ModelBundle& bundle)> before_step;
  std::function<void(const EpochLogRow&)> on_epoch;
};

struct TrainResult {
  /// State after the last completed epoch.
  ModelBundle final_bundle;
  /// Parameters at the best validation epoch (the last epoch without a
  /// validation set).
  ModelBundle best_bundle;
  TrainingLog log;
  /// `<out_dir>/checkpoints/best` stem, empty when no directory was given.
  std::filesystem::path best_checkpoint;
  int best_epoch = -1;
  double best_monitor = 0.0;
  bool stopped_early = false;
  TrainState state;
};

/// Trains `bundle` (whose head kind must equal cfg.approach). With a
/// non-empty `out_dir`, writes checkpoints/best, checkpoints/last and the
/// CSV logs there. A non-finite loss raises TrainingError; checkpoints
/// already on disk are left as they were.
TrainResult train(ModelBundle bundle, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const std::filesystem::path& out_dir = {}, const TrainHooks& hooks = {});

/// Deterministic evaluation with a centre crop to the backbone input side.
std::vector<PredictionRecord> evaluate(const ModelBundle& bundle, std::span<const Sample> samples,
                                       int batch_size = 64);

/// Index of the largest probability; ties go to the lowest index.
int argmax(std::span<const double> values);

/// phi(x) for each sample (centre crop), {N, D}.
Tensor extract_features(const ModelBundle& bundle, std::span<const Sample> samples, int batch_size = 64);

struct ProbeConfig {
  int iterations = 300;
  double learning_rate = 0.05;
};

/// Softmax-regression probe on standardised features, fitted full-batch
/// from a zero initialisation. Returns test accuracy.
double fit_probe(const Tensor& train_features, std::span<const int> train_labels, const Tensor& test_features,
                 std::span<const int> test_labels, int num_classes, const ProbeConfig& cfg = {});

/// Probe accuracy for predicting the named schema group from frozen phi(x).
double probe_attribute(const ModelBundle& bundle, std::span<const Sample> probe_train,
                       std::span<const Sample> probe_test, const std::string& group, const ProbeConfig& cfg = {});

/// Columns: id,true,pred,p_0..p_{K-1},<one category index column per group>.
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records,
                       const AttributeSchema& schema, const ExpressionVocab& vocab);
/// Throws ValidationError naming the first malformed line.
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path, const AttributeSchema& schema,
                                               const ExpressionVocab& vocab);

}  // namespace fairexpr

#endif  // FAIREXPR_TRAINER_HPP_
