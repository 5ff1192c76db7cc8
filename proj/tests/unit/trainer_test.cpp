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


#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fairexpr/checkpoint.hpp"
#include "fairexpr/errors.hpp"
#include "fairexpr/synthetic.hpp"
#include "fairexpr/trainer.hpp"
#include "test_support.hpp"

namespace fairexpr {
namespace {

using ::testing::HasSubstr;
using testing::TempDir;

const AttributeSchema kGender({{"gender", {"Male", "Female"}}});
const ExpressionVocab kVocab{"a", "b", "c"};

std::vector<Sample> tiny_data(int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_samples = n;
  cfg.image_side = 16;
  cfg.schema = kGender;
  cfg.vocab = kVocab;
  cfg.seed = seed;
  return generate(cfg).samples;
}

TrainConfig quick_config(HeadKind approach) {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 2;
  cfg.early_stop_patience_epochs = 2;
  cfg.approach = approach;
  cfg.seed = 4;
  cfg.augment.crop_size = 16;
  cfg.augment.rotation_min_degrees = -5;
  cfg.augment.rotation_max_degrees = 5;
  return cfg;
}

ModelBundle tiny_bundle(HeadKind kind, std::uint64_t seed = 1) {
  return ModelBundle(testing::tiny_spec(kind, 3, kGender), seed);
}

TEST(Schedule, StepDecay) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 0), 0.001);
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 39), 0.001);
  EXPECT_DOUBLE_EQ(learning_rate_at(cfg, 40), 0.0001);
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    cfg.lr_decay_every_epochs = static_cast<int>(rng.uniform_int(1, 50));
    cfg.lr_decay_factor = rng.uniform(0.05, 1.0);
    const int epoch = static_cast<int>(rng.uniform_int(0, 300));
    EXPECT_NEAR(learning_rate_at(cfg, epoch),
                cfg.initial_lr * std::pow(cfg.lr_decay_factor, std::floor(epoch / double(cfg.lr_decay_every_epochs))),
                1e-18);
  }
}

TEST(Schedule, Defaults) {
  const auto raf = TrainConfig::raf_defaults();
  EXPECT_EQ(raf.batch_size, 64);
  EXPECT_EQ(raf.initial_lr, 0.001);
  EXPECT_EQ(raf.lr_decay_factor, 0.1);
  EXPECT_EQ(raf.max_epochs, 200);
  EXPECT_EQ(raf.early_stop_patience_epochs, 30);
  EXPECT_EQ(TrainConfig::celeba_defaults().early_stop_patience_epochs, 5);
  EXPECT_EQ(TrainConfig::celeba_defaults().lr_decay_every_epochs, 2);
}

TEST(Schedule, ValidationNamesField) {
  TrainConfig cfg;
  cfg.max_epochs = 10;
  try {
    cfg.validate();
    FAIL() << "patience above max_epochs accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "train.early_stop_patience_epochs");
  }
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(EarlyStop, FlatMonitorStopsAfterPatience) {
  EarlyStopping stop(30);
  int halted_at = -1;
  for (int epoch = 0; epoch < 100; ++epoch) {
    stop.update(0.5);
    if (stop.should_stop()) {
      halted_at = epoch;
      break;
    }
  }
  EXPECT_EQ(halted_at, 30);
}

TEST(EarlyStop, ImprovementResetsCounter) {
  EarlyStopping stop(2);
  EXPECT_TRUE(stop.update(0.1));
  EXPECT_FALSE(stop.update(0.1));
  EXPECT_TRUE(stop.update(0.2));
  EXPECT_FALSE(stop.should_stop());
  EXPECT_FALSE(stop.update(0.15));
  EXPECT_FALSE(stop.update(0.2));
  EXPECT_TRUE(stop.should_stop());
}

TEST(Train, FrozenMonitorHaltsEarly) {
  const auto data = tiny_data(24, 1);
  auto cfg = quick_config(HeadKind::baseline);
  cfg.initial_lr = 1e-30;
  cfg.max_epochs = 10;
  cfg.early_stop_patience_epochs = 3;
  cfg.augment.enabled = false;
  const auto result = train(tiny_bundle(HeadKind::baseline), data, tiny_data(12, 2), cfg);
  EXPECT_TRUE(result.stopped_early);
  EXPECT_EQ(result.log.epochs.size(), 4U);
  EXPECT_EQ(result.best_epoch, 0);
}

TEST(Train, RepeatedRunsWriteIdenticalLogs) {
  const auto data = tiny_data(24, 3);
  const auto val = tiny_data(9, 4);
  TempDir a;
  TempDir b;
  const auto cfg = quick_config(HeadKind::disentangled);
  train(tiny_bundle(HeadKind::disentangled), data, val, cfg, a.path());
  train(tiny_bundle(HeadKind::disentangled), data, val, cfg, b.path());
  const auto log_a = testing::read_text(a / "train_log.csv");
  EXPECT_THAT(log_a, ::testing::StartsWith("step,exp,s,conf,total,alpha\n"));
  EXPECT_EQ(log_a, testing::read_text(b / "train_log.csv"));
  EXPECT_EQ(testing::read_text(a / "epoch_log.csv"), testing::read_text(b / "epoch_log.csv"));
  EXPECT_EQ(testing::read_text(a / "checkpoints/best.bin"), testing::read_text(b / "checkpoints/best.bin"));
}

TEST(Train, EveryApproachRunsAndLogsComponents) {
  const auto data = tiny_data(16, 5);
  for (auto kind : {HeadKind::baseline, HeadKind::attribute_aware, HeadKind::disentangled}) {
    auto cfg = quick_config(kind);
    cfg.max_epochs = 1;
    cfg.early_stop_patience_epochs = 1;
    cfg.alpha = 0.5;
    const auto result = train(tiny_bundle(kind), data, {}, cfg);
    ASSERT_EQ(result.log.steps.size(), 2U);
    for (const auto& row : result.log.steps) {
      const auto& l = row.loss;
      EXPECT_NEAR(l.total, l.exp + l.s + l.alpha * l.conf, 1e-9);
      if (kind == HeadKind::disentangled) {
        EXPECT_GT(l.s, 0.0);
        EXPECT_GT(l.conf, 0.0);
      } else {
        EXPECT_EQ(l.s, 0.0);
        EXPECT_EQ(l.conf, 0.0);
      }
    }
  }
}

TEST(Train, NanAbortsAndKeepsLastGoodCheckpoint) {
  const auto data = tiny_data(16, 6);
  TempDir dir;
  auto cfg = quick_config(HeadKind::baseline);
  cfg.max_epochs = 3;
  TrainHooks hooks;
  hooks.before_step = [](std::int64_t step, ModelBundle& bundle) {
    if (step != 3) return;
    const auto head = bundle.partition_indices(Partition::primary_head);
    bundle.params()[head.back()].value[0] = std::numeric_limits<double>::quiet_NaN();
  };
  try {
    train(tiny_bundle(HeadKind::baseline), data, tiny_data(6, 7), cfg, dir.path(), hooks);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_THAT(e.what(), HasSubstr("step 3"));
  }
  const auto ck = load_checkpoint(dir / "checkpoints/best");
  EXPECT_EQ(ck.meta.epoch, 0);
  for (const auto& p : ck.bundle.params())
    for (double v : p.value.values()) ASSERT_TRUE(std::isfinite(v));
}

TEST(Train, RejectsEmptyTrainingSetAndMismatchedApproach) {
  const auto cfg = quick_config(HeadKind::baseline);
  EXPECT_THROW(train(tiny_bundle(HeadKind::baseline), {}, {}, cfg), ValidationError);
  EXPECT_THROW(train(tiny_bundle(HeadKind::disentangled), tiny_data(4, 1), {}, cfg), ConfigError);
}

TEST(Evaluate, UniformModelPredictsFirstClass) {
  auto bundle = tiny_bundle(HeadKind::baseline);
  zero_partition(bundle, Partition::primary_head);
  const auto data = tiny_data(10, 8);
  const auto records = evaluate(bundle, data);
  ASSERT_EQ(records.size(), data.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].predicted, 0);
    EXPECT_EQ(records[i].id, data[i].id);
    EXPECT_EQ(records[i].truth, data[i].expression);
    EXPECT_EQ(records[i].attributes, data[i].attributes);
  }
  EXPECT_EQ(evaluate(bundle, data), records);
  EXPECT_EQ(argmax(std::vector<double>{0.2, 0.4, 0.4}), 1);
}

TEST(Evaluate, SchemaMismatchIsValidationError) {
  auto data = tiny_data(4, 9);
  data[0].attributes = {0, 1};
  EXPECT_THROW(evaluate(tiny_bundle(HeadKind::baseline), data), ValidationError);
}

TEST(Probe, ConstantFeaturesGiveChance) {
  const std::size_t n = 40;
  Tensor train_x({n, 4}, 1.5);
  Tensor test_x({n, 4}, 1.5);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  EXPECT_NEAR(fit_probe(train_x, y, test_x, y, 2), 0.5, 1e-12);
}

TEST(Probe, OneHotFeaturesAreSeparable) {
  const std::size_t n = 30;
  Tensor x({n, 3});
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 3);
    x.at(i, static_cast<std::size_t>(y[i])) = 1.0;
  }
  EXPECT_EQ(fit_probe(x, y, x, y, 3), 1.0);
}

TEST(Probe, UnknownGroupIsValidationError) {
  const auto data = tiny_data(6, 10);
  EXPECT_THROW(probe_attribute(tiny_bundle(HeadKind::baseline), data, data, "race"), ValidationError);
  const double acc = probe_attribute(tiny_bundle(HeadKind::baseline), data, data, "gender");
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
}

TEST(Predictions, CsvRoundTrip) {
  TempDir dir;
  std::vector<PredictionRecord> records{
      {"x1", 0, 2, {0.1, 0.2, 0.7}, {1}},
      {"x,2", 2, 2, {1.0 / 3.0, 0.25, 1.0 - 1.0 / 3.0 - 0.25}, {0}},
  };
  write_predictions(dir / "p.csv", records, kGender, kVocab);
  EXPECT_THAT(testing::read_text(dir / "p.csv"), ::testing::StartsWith("id,true,pred,p_0,p_1,p_2,gender\n"));
  EXPECT_EQ(read_predictions(dir / "p.csv", kGender, kVocab), records);
}

TEST(Predictions, MalformedLineIsReported) {
  TempDir dir;
  testing::write_text(dir / "p.csv",
                      "id,true,pred,p_0,p_1,p_2,gender\n"
                      "a,0,0,0.5,0.25,0.25,1\n"
                      "b,1,0,0.5,oops,0.25,0\n");
  try {
    read_predictions(dir / "p.csv", kGender, kVocab);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_THAT(e.what(), HasSubstr("p.csv:3"));
  }
}

}  // namespace
}  // namespace fairexpr
