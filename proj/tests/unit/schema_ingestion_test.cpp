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

#include <algorithm>
#include <set>

#include "fairexpr/errors.hpp"
#include "fairexpr/ingestion.hpp"
#include "fairexpr/schema.hpp"
#include "test_support.hpp"

namespace fairexpr {
namespace {

using ::testing::ElementsAre;
using ::testing::HasSubstr;
using testing::TempDir;

constexpr const char* kHeader = "id,path,expression,race,gender,age,split\n";

class ManifestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::filesystem::create_directories(dir_ / "img");
    write_png(dir_ / "img/a.png", testing::random_image(20, 1));
    write_png(dir_ / "img/b.png", testing::random_image(20, 2));
    write_png(dir_ / "img/c.png", testing::random_image(20, 3));
  }

  std::filesystem::path manifest(const std::string& body) {
    const auto path = dir_ / "manifest.csv";
    testing::write_text(path, kHeader + body);
    return path;
  }

  TempDir dir_;
  AttributeSchema schema_ = AttributeSchema::raf_default();
  ExpressionVocab vocab_ = raf_expression_vocab();
};

TEST_F(ManifestTest, DropsUnsureGenderRows) {
  const auto path = manifest(
      "a,img/a.png,Happy,Asian,Male,20-39,train\n"
      "b,img/b.png,Sad,Caucasian,Unsure,4-19,train\n"
      "c,img/c.png,Fear,Caucasian,Female,70+,test\n");
  const auto samples = load_manifest(path, schema_, vocab_);
  ASSERT_EQ(samples.size(), 2U);
  EXPECT_EQ(samples[0].id, "a");
  EXPECT_EQ(samples[1].id, "c");
  EXPECT_EQ(samples[1].split, "test");
}

TEST_F(ManifestTest, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(load_manifest(manifest(""), schema_, vocab_).empty());
}

TEST_F(ManifestTest, ResolvesLabelsAndNormalizesImages) {
  ManifestOptions opts;
  opts.image_side = 100;
  const auto samples = load_manifest(manifest("a,img/a.png,Happy,Asian,Female,40-69,val\n"), schema_, vocab_, opts);
  ASSERT_EQ(samples.size(), 1U);
  EXPECT_EQ(samples[0].expression, 3);
  EXPECT_THAT(samples[0].attributes, ElementsAre(2, 1, 3));
  const auto& img = samples[0].image;
  EXPECT_EQ(img.height, 100);
  EXPECT_EQ(img.width, 100);
  EXPECT_EQ(img.channels, 3);
  EXPECT_TRUE(std::all_of(img.pixels.begin(), img.pixels.end(), [](float v) { return v >= 0.0F && v <= 1.0F; }));
}

TEST_F(ManifestTest, UnknownLabelNamesLine) {
  const auto path = manifest(
      "a,img/a.png,Happy,Asian,Male,20-39,train\n"
      "b,img/b.png,Bored,Asian,Male,20-39,train\n");
  try {
    load_manifest(path, schema_, vocab_);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_THAT(e.what(), HasSubstr("manifest.csv:3"));
    EXPECT_THAT(e.what(), HasSubstr("Bored"));
  }
}

TEST_F(ManifestTest, UnreadableImageNamesPath) {
  const auto path = manifest("a,img/missing.png,Happy,Asian,Male,20-39,train\n");
  try {
    load_manifest(path, schema_, vocab_);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_THAT(e.what(), HasSubstr("missing.png"));
  }
}

TEST_F(ManifestTest, MissingFileIsIoError) {
  EXPECT_THROW(load_manifest(dir_ / "nope.csv", schema_, vocab_), IoError);
}

TEST(EncodeAttributes, RafStyleOneHot) {
  const auto schema = AttributeSchema::raf_default();
  const std::vector<int> attrs{1, 0, 2};
  const auto v = encode_attributes(attrs, schema);
  EXPECT_THAT(v, ElementsAre(0, 1, 0, 1, 0, 0, 0, 1, 0, 0));
  double sum = 0;
  for (double x : v) sum += x;
  EXPECT_EQ(sum, 3.0);
}

TEST(EncodeAttributes, SingleGroup) {
  const AttributeSchema schema({{"gender", {"Male", "Female"}}});
  const std::vector<int> attrs{1};
  EXPECT_THAT(encode_attributes(attrs, schema), ElementsAre(0, 1));
}

TEST(EncodeAttributes, InjectiveOverAllTuples) {
  const auto schema = AttributeSchema::raf_default();
  std::set<std::vector<double>> seen;
  for (int r = 0; r < 3; ++r)
    for (int g = 0; g < 2; ++g)
      for (int a = 0; a < 5; ++a) seen.insert(encode_attributes(std::vector<int>{r, g, a}, schema));
  EXPECT_EQ(seen.size(), 30U);
  EXPECT_EQ(schema.encoding_width(), 10U);
}

TEST(EncodeAttributes, OutOfRangeIsValidationError) {
  const auto schema = AttributeSchema::raf_default();
  EXPECT_THROW(encode_attributes(std::vector<int>{3, 0, 0}, schema), ValidationError);
  EXPECT_THROW(encode_attributes(std::vector<int>{0, 0}, schema), ValidationError);
}

TEST(Schema, RejectsDuplicatesAndSingletons) {
  EXPECT_THROW(AttributeSchema({{"g", {"a", "b"}}, {"g", {"c", "d"}}}), ValidationError);
  EXPECT_THROW(AttributeSchema({{"g", {"a", "a"}}}), ValidationError);
  EXPECT_THROW(AttributeSchema(std::vector<AttributeGroup>{{"g", {"a"}}}), ValidationError);
}

std::vector<Sample> numbered(int n) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.id = "s" + std::to_string(i);
    out.push_back(s);
  }
  return out;
}

std::vector<std::string> ids(const std::vector<Sample>& v) {
  std::vector<std::string> out;
  for (const auto& s : v) out.push_back(s.id);
  return out;
}

TEST(Split, DeterministicForSameSeed) {
  const SplitFractions f{0.8, 0.0, 0.2};
  const auto a = split_deterministic(numbered(10), f, 7);
  const auto b = split_deterministic(numbered(10), f, 7);
  EXPECT_EQ(ids(a.train), ids(b.train));
  EXPECT_EQ(ids(a.val), ids(b.val));
  EXPECT_EQ(ids(a.test), ids(b.test));
  EXPECT_EQ(a.train.size(), 8U);
  EXPECT_EQ(a.test.size(), 2U);
}

TEST(Split, AllTrain) {
  const auto s = split_deterministic(numbered(13), {1.0, 0.0, 0.0}, 1);
  EXPECT_EQ(s.train.size(), 13U);
  EXPECT_TRUE(s.val.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(Split, FloorRounding) {
  const auto s = split_deterministic(numbered(100), {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(s.train.size(), 80U);
  EXPECT_EQ(s.val.size(), 10U);
  EXPECT_EQ(s.test.size(), 10U);
  const auto odd = split_deterministic(numbered(7), {0.5, 0.25, 0.25}, 3);
  EXPECT_EQ(odd.train.size(), 3U);
  EXPECT_EQ(odd.val.size(), 1U);
  EXPECT_EQ(odd.test.size(), 3U);
}

TEST(Split, UnionIsInputWithoutDuplicates) {
  const auto s = split_deterministic(numbered(57), {0.6, 0.2, 0.2}, 11);
  std::multiset<std::string> all;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const auto& x : *part) all.insert(x.id);
  const auto input = ids(numbered(57));
  EXPECT_EQ(all, std::multiset<std::string>(input.begin(), input.end()));
}

TEST(Split, RejectsBadFractions) {
  EXPECT_THROW(split_deterministic(numbered(4), {0.5, 0.2, 0.2}, 0), ValidationError);
  EXPECT_THROW(split_deterministic(numbered(4), {1.2, -0.2, 0.0}, 0), ValidationError);
}

TEST(Split, ByTag) {
  auto samples = numbered(3);
  samples[0].split = "train";
  samples[1].split = "val";
  samples[2].split = "test";
  const auto s = split_by_tag(samples);
  EXPECT_THAT(ids(s.train), ElementsAre("s0"));
  EXPECT_THAT(ids(s.val), ElementsAre("s1"));
  EXPECT_THAT(ids(s.test), ElementsAre("s2"));
  samples[0].split = "holdout";
  EXPECT_THROW(split_by_tag(samples), ValidationError);
}

}  // namespace
}  // namespace fairexpr
