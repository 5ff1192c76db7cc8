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

#include "fairexpr/errors.hpp"
#include "fairexpr/ingestion.hpp"
#include "fairexpr/synthetic.hpp"
#include "test_support.hpp"

namespace fairexpr {
namespace {

using ::testing::HasSubstr;

SynthConfig small_config(int n, double rho) {
  SynthConfig cfg;
  cfg.n_samples = n;
  cfg.image_side = 16;
  cfg.bias = {{"race", rho}};
  cfg.seed = 12;
  return cfg;
}

TEST(Generate, FullBiasFollowsLink) {
  const auto cfg = small_config(500, 1.0);
  const auto data = generate(cfg);
  const auto link = cfg.link_for(0);
  for (const auto& s : data.samples) ASSERT_EQ(s.attributes[0], link[static_cast<std::size_t>(s.expression)]);
  const auto audit = bias_audit(data.samples, cfg.schema, cfg.num_classes());
  const auto& race = audit.tables[0];
  for (std::size_t c = 0; c < race.counts.size(); ++c)
    for (std::size_t s = 0; s < race.counts[c].size(); ++s)
      if (static_cast<int>(s) != link[c]) EXPECT_EQ(race.counts[c][s], 0U);
}

TEST(Generate, NoBiasGivesNearZeroInformation) {
  auto cfg = small_config(10000, 0.0);
  const auto data = generate(cfg);
  const auto audit = bias_audit(data.samples, cfg.schema, cfg.num_classes());
  // Plug-in estimator bias is about (R-1)(C-1)/(2N), below 1e-3 here.
  for (const auto& table : audit.tables) EXPECT_LT(mutual_information(table), 3e-3) << table.group;
  cfg.bias = {{"race", 0.95}};
  const auto biased = bias_audit(generate(cfg).samples, cfg.schema, cfg.num_classes());
  EXPECT_GT(mutual_information(biased.tables[0]), 0.1);
}

TEST(Generate, MarginalsAreRespected) {
  const auto cfg = small_config(8000, 0.0);
  const auto audit = bias_audit(generate(cfg).samples, cfg.schema, cfg.num_classes());
  const auto observed = audit.tables[0].category_marginals();
  const std::vector<double> expected{0.774, 0.071, 0.155};
  for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(observed[s], expected[s], 0.02);
}

TEST(Generate, DeterministicPerSeed) {
  const auto cfg = small_config(40, 0.8);
  testing::TempDir a;
  testing::TempDir b;
  write_dataset(a.path(), cfg, generate(cfg));
  write_dataset(b.path(), cfg, generate(cfg));
  EXPECT_EQ(testing::read_text(a / "manifest.csv"), testing::read_text(b / "manifest.csv"));
  for (const auto& entry : std::filesystem::directory_iterator(a / "images")) {
    EXPECT_EQ(testing::read_text(entry.path()), testing::read_text(b / "images" / entry.path().filename()));
  }
  auto other = cfg;
  other.seed = 13;
  EXPECT_NE(generate(other).samples[0].image, generate(cfg).samples[0].image);
}

TEST(Generate, SamplesSatisfyIngestionContract) {
  auto cfg = small_config(20, 0.5);
  cfg.image_side = 100;
  for (const auto& s : generate(cfg).samples) {
    EXPECT_EQ(s.image.height, 100);
    EXPECT_EQ(s.image.width, 100);
    EXPECT_TRUE(std::all_of(s.image.pixels.begin(), s.image.pixels.end(), [](float v) { return v >= 0 && v <= 1; }));
    validate_attributes(s.attributes, cfg.schema);
  }
}

TEST(Generate, RoundTripThroughManifest) {
  const auto cfg = small_config(30, 0.9);
  const auto data = generate(cfg);
  testing::TempDir dir;
  write_dataset(dir.path(), cfg, data);
  ManifestOptions opts;
  opts.image_side = cfg.image_side;
  const auto loaded = load_manifest(dir / "manifest.csv", cfg.schema, cfg.vocab, opts);
  ASSERT_EQ(loaded.size(), data.samples.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].id, data.samples[i].id);
    EXPECT_EQ(loaded[i].expression, data.samples[i].expression);
    EXPECT_EQ(loaded[i].attributes, data.samples[i].attributes);
    EXPECT_EQ(loaded[i].image, data.samples[i].image);
  }
}

TEST(Generate, RejectsInconsistentConfig) {
  auto cfg = small_config(10, 0.5);
  cfg.marginals = {{"gender", {0.2, 0.3, 0.5}}};
  EXPECT_THROW(generate(cfg), ValidationError);
  cfg = small_config(10, 1.5);
  EXPECT_THROW(generate(cfg), ValidationError);
  cfg = small_config(10, 0.5);
  cfg.marginals = {{"gender", {0.2, 0.7}}};
  EXPECT_THROW(generate(cfg), ValidationError);
}

TEST(Audit, MatchesNaiveRecount) {
  const auto cfg = small_config(700, 0.7);
  const auto data = generate(cfg);
  const auto audit = bias_audit(data.samples, cfg.schema, cfg.num_classes());
  EXPECT_EQ(audit.n_samples, 700U);
  for (std::size_t j = 0; j < cfg.schema.size(); ++j) {
    const auto& table = audit.tables[j];
    EXPECT_EQ(table.group, cfg.schema.group(j).name);
    EXPECT_EQ(table.total(), 700U);
    for (int c = 0; c < cfg.num_classes(); ++c) {
      for (int s = 0; s < static_cast<int>(cfg.schema.group(j).size()); ++s) {
        std::size_t n = 0;
        for (const auto& x : data.samples) n += (x.expression == c && x.attributes[j] == s) ? 1 : 0;
        EXPECT_EQ(table.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)], n);
      }
    }
  }
  const auto md = audit_to_markdown(audit, cfg.schema, cfg.vocab);
  EXPECT_THAT(md, HasSubstr("Caucasian"));
  EXPECT_THAT(md, HasSubstr("%"));
  EXPECT_THAT(audit_to_csv(audit, cfg.schema, cfg.vocab), HasSubstr("race"));
}

TEST(Audit, DefaultLink) {
  EXPECT_EQ(default_link(7, 3), (std::vector<int>{0, 1, 2, 2, 2, 2, 2}));
  EXPECT_EQ(default_link(2, 5), (std::vector<int>{0, 1}));
}

}  // namespace
}  // namespace fairexpr
