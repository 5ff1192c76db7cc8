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

#include <sstream>

#include "fairexpr/commands.hpp"
#include "fairexpr/compare.hpp"
#include "fairexpr/config.hpp"
#include "fairexpr/csv.hpp"
#include "fairexpr/errors.hpp"
#include "fairexpr/trainer.hpp"
#include "test_support.hpp"

namespace fairexpr {
namespace {

using ::testing::HasSubstr;
using testing::TempDir;

namespace fs = std::filesystem;

std::string tiny_yaml(const std::string& approach, const std::string& extra_synth = "",
                      const std::string& schema = "  - {name: gender, categories: [Male, Female]}\n") {
  return "experiment: {name: tiny, seed: 5, output_dir: run}\n"
         "dataset:\n"
         "  synth:\n"
         "    n_samples: 48\n"
         "    image_side: 16\n" +
         extra_synth +
         "  split: {train: 0.5, val: 0.25, test: 0.25}\n"
         "schema:\n" +
         schema +
         "expressions: [calm, glad, cross]\n"
         "approach: " +
         approach +
         "\n"
         "model: {feature_dim: 8, tiny_channels: [4, 4, 4]}\n"
         "augment: {enabled: false, crop_size: 16}\n"
         "train: {batch_size: 8, max_epochs: 1, early_stop_patience_epochs: 1}\n";
}

struct Cli {
  std::ostringstream log;
  std::ostringstream err;
};

CommandOptions with_config(const fs::path& cfg) {
  CommandOptions o;
  o.config = cfg;
  o.quiet = true;
  return o;
}

TEST(Config, ParsesAndResolvesDefaults) {
  TempDir dir;
  const auto cfg = parse_config(tiny_yaml("baseline"), dir.path());
  EXPECT_EQ(cfg.name, "tiny");
  EXPECT_EQ(cfg.seed, 5U);
  EXPECT_EQ(cfg.output_dir, dir / "run");
  EXPECT_EQ(cfg.dataset.synth_dir, dir / "run/data");
  EXPECT_EQ(cfg.train.batch_size, 8);
  EXPECT_EQ(cfg.train.initial_lr, 0.001);
  const auto yaml = resolved_yaml(cfg);
  EXPECT_THAT(yaml, HasSubstr("bias: {}"));
  EXPECT_THAT(yaml, HasSubstr("marginals:"));
  EXPECT_THAT(yaml, HasSubstr("gender: [0.437, 0.563]"));
  EXPECT_THAT(yaml, HasSubstr("initial_lr: 0.001"));
  // The canonical dump parses back to the same dump.
  EXPECT_EQ(resolved_yaml(parse_config(yaml, dir.path())), yaml);
}

TEST(Config, UnknownKeyNamesPath) {
  TempDir dir;
  try {
    parse_config(tiny_yaml("baseline", "    colour: red\n"), dir.path());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "dataset.synth.colour");
  }
}

TEST(Config, InvalidMarginalsNamePath) {
  TempDir dir;
  try {
    parse_config(tiny_yaml("baseline", "    marginals: {gender: [0.7, 0.7]}\n"), dir.path());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "dataset.synth.marginals.gender");
  }
}

TEST(Commands, SynthWritesManifestAndAudit) {
  TempDir dir;
  testing::write_text(dir / "c.yaml", tiny_yaml("baseline", "    bias: {gender: 0.9}\n"));
  Cli io;
  ASSERT_EQ(cmd_synth(with_config(dir / "c.yaml"), io.log, io.err), kExitOk) << io.err.str();
  const auto lines = csv::read_lines((dir / "run/data/manifest.csv").string());
  EXPECT_EQ(lines.size(), 49U);
  EXPECT_TRUE(fs::exists(dir / "run/data/audit.md"));
  EXPECT_THAT(testing::read_text(dir / "run/data/resolved_config.yaml"), HasSubstr("bias: {gender: 0.9}"));
}

TEST(Commands, SynthInvalidMarginalsExitsTwo) {
  TempDir dir;
  testing::write_text(dir / "c.yaml", tiny_yaml("baseline", "    marginals: {gender: [0.7, 0.7]}\n"));
  Cli io;
  EXPECT_EQ(cmd_synth(with_config(dir / "c.yaml"), io.log, io.err), kExitConfig);
  EXPECT_THAT(io.err.str(), HasSubstr("dataset.synth.marginals.gender"));
}

TEST(Commands, DisentangledWithoutSchemaExitsTwo) {
  TempDir dir;
  testing::write_text(dir / "c.yaml", tiny_yaml("disentangled", "", "  []\n"));
  Cli io;
  EXPECT_EQ(cmd_train(with_config(dir / "c.yaml"), io.log, io.err), kExitConfig);
  EXPECT_THAT(io.err.str(), HasSubstr("schema"));
}

TEST(Commands, MissingConfigExitsTwo) {
  Cli io;
  CommandOptions o;
  o.quiet = true;
  EXPECT_EQ(cmd_train(o, io.log, io.err), kExitConfig);
}

TEST(Commands, PipelineIsReproducible) {
  TempDir dir;
  testing::write_text(dir / "c.yaml", tiny_yaml("disentangled", "    bias: {gender: 0.9}\n"));
  std::string first;
  for (int round = 0; round < 2; ++round) {
    auto opts = with_config(dir / "c.yaml");
    opts.out = dir / ("run" + std::to_string(round));
    Cli io;
    ASSERT_EQ(cmd_train(opts, io.log, io.err), kExitOk) << io.err.str();
    CommandOptions eval_opts;
    eval_opts.quiet = true;
    eval_opts.inputs = {*opts.out};
    ASSERT_EQ(cmd_eval(eval_opts, io.log, io.err), kExitOk) << io.err.str();
    ASSERT_EQ(cmd_report(eval_opts, io.log, io.err), kExitOk) << io.err.str();
    const auto report = testing::read_text(*opts.out / "report.json");
    EXPECT_FALSE(report.empty());
    if (round == 0) {
      first = report;
    } else {
      EXPECT_EQ(report, first);
      EXPECT_EQ(testing::read_text(dir / "run0/train_log.csv"), testing::read_text(dir / "run1/train_log.csv"));
    }
  }
}

class ReportCommandTest : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::write_text(dir_ / "c.yaml", tiny_yaml("baseline"));
  }

  int report(const std::string& predictions_body) {
    testing::write_text(dir_ / "p.csv", "id,true,pred,p_0,p_1,p_2,gender\n" + predictions_body);
    auto o = with_config(dir_ / "c.yaml");
    o.inputs = {dir_ / "p.csv"};
    return cmd_report(o, io_.log, io_.err);
  }

  TempDir dir_;
  Cli io_;
};

TEST_F(ReportCommandTest, HandBuiltLogMatchesHandValues) {
  ASSERT_EQ(report("a,0,0,1,0,0,0\n"
                   "b,0,1,0,1,0,0\n"
                   "c,1,1,0,1,0,0\n"
                   "d,0,0,1,0,0,1\n"
                   "e,1,1,0,1,0,1\n"
                   "f,1,1,0,1,0,1\n"),
            kExitOk)
      << io_.err.str();
  const auto report = report_from_json(testing::read_text(dir_ / "report.json"));
  EXPECT_EQ(report.num_records, 6U);
  EXPECT_DOUBLE_EQ(report.overall_accuracy, 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(*report.mean_class_accuracy, 5.0 / 6.0);
  EXPECT_FALSE(report.per_class_recall.contains(2));
  ASSERT_EQ(report.groupings.size(), 1U);
  EXPECT_EQ(report.groupings[0].fairness, 0.75);
  EXPECT_EQ(report.groupings[0].dominant, "Female");
  EXPECT_THAT(testing::read_text(dir_ / "report.md"), HasSubstr("| Gender |"));
}

TEST_F(ReportCommandTest, SingleSubgroupGetsNote) {
  ASSERT_EQ(report("a,0,0,1,0,0,0\nb,1,1,0,1,0,0\n"), kExitOk) << io_.err.str();
  const auto md = testing::read_text(dir_ / "report.md");
  EXPECT_THAT(md, HasSubstr("fewer than two subgroups"));
  EXPECT_THAT(md, HasSubstr("excluded: Female"));
}

TEST_F(ReportCommandTest, MalformedRecordExitsTwoWithLine) {
  EXPECT_EQ(report("a,0,0,1,0,0,0\nb,1,1,0,1,0\n"), kExitConfig);
  EXPECT_THAT(io_.err.str(), HasSubstr("p.csv:3"));
}

void fake_run(const fs::path& dir, const std::string& approach, bool augment, const std::vector<std::string>& ids) {
  fs::create_directories(dir);
  auto cfg = parse_config(tiny_yaml(approach), dir);
  cfg.train.augment.enabled = augment;
  testing::write_text(dir / "resolved_config.yaml", resolved_yaml(cfg));
  std::vector<PredictionRecord> records;
  int i = 0;
  for (const auto& id : ids) {
    const int truth = i % 3;
    const int gender = (i / 3) % 2;
    records.push_back({id, truth, (i % 4 == 0) ? (truth + 1) % 3 : truth, {0.2, 0.3, 0.5}, {gender}});
    ++i;
  }
  write_predictions(dir / "predictions.csv", records, cfg.schema, cfg.vocab);
}

TEST(CompareCommand, SingleRunExitsTwo) {
  TempDir dir;
  fake_run(dir / "a", "baseline", false, {"x", "y"});
  CommandOptions o;
  o.quiet = true;
  o.inputs = {dir / "a"};
  Cli io;
  EXPECT_EQ(cmd_compare(o, io.log, io.err), kExitConfig);
}

TEST(CompareCommand, MismatchedEvalSetsExitTwo) {
  TempDir dir;
  fake_run(dir / "a", "baseline", false, {"x", "y", "z"});
  fake_run(dir / "b", "disentangled", false, {"x", "y", "w"});
  CommandOptions o;
  o.quiet = true;
  o.inputs = {dir / "a", dir / "b"};
  o.out = dir / "cmp";
  Cli io;
  EXPECT_EQ(cmd_compare(o, io.log, io.err), kExitConfig);
  EXPECT_THAT(io.err.str(), HasSubstr("different sample sets"));
}

TEST(CompareCommand, SixRunsGiveSixColumns) {
  TempDir dir;
  std::vector<std::string> ids;
  for (int i = 0; i < 24; ++i) ids.push_back("s" + std::to_string(i));
  CommandOptions o;
  o.quiet = true;
  o.out = dir / "cmp";
  for (bool aug : {true, false}) {
    for (const char* approach : {"disentangled", "baseline", "attribute_aware"}) {
      const auto run = dir / (std::string(approach) + (aug ? "_aug" : ""));
      fake_run(run, approach, aug, ids);
      o.inputs.push_back(run);
    }
  }
  Cli io;
  ASSERT_EQ(cmd_compare(o, io.log, io.err), kExitOk) << io.err.str();
  const auto md = testing::read_text(dir / "cmp/comparison.md");
  EXPECT_THAT(md, HasSubstr("Without Augmentation<br>Baseline | Without Augmentation<br>Attri-aware | "
                            "Without Augmentation<br>Disentangle | With Augmentation<br>Baseline"));
  EXPECT_TRUE(fs::exists(dir / "cmp/comparison.txt"));
  EXPECT_TRUE(fs::exists(dir / "cmp/comparison.json"));
}

TEST(Comparison, IdenticalRunsGiveIdenticalColumns) {
  std::vector<PredictionRecord> records{{"a", 0, 0, {1, 0, 0}, {0}}, {"b", 1, 0, {1, 0, 0}, {1}},
                                        {"c", 1, 1, {0, 1, 0}, {0}}, {"d", 2, 2, {0, 0, 1}, {1}}};
  const AttributeSchema schema({{"gender", {"Male", "Female"}}});
  const auto report = build_report(records, schema, {"calm", "glad", "cross"});
  const auto m = build_comparison({{"r1", HeadKind::baseline, false, report}, {"r2", HeadKind::baseline, false, report}});
  ASSERT_EQ(m.columns.size(), 2U);
  for (const auto& table : m.tables)
    for (const auto& row : table.rows) {
      if (row.section) continue;
      ASSERT_EQ(row.values.size(), 2U);
      EXPECT_EQ(row.values[0], row.values[1]) << table.title << " / " << row.label;
    }
  EXPECT_THROW(build_comparison({{"r1", HeadKind::baseline, false, report}}), ValidationError);
}

}  // namespace
}  // namespace fairexpr
