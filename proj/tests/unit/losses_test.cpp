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


#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fairexpr/errors.hpp"
#include "fairexpr/losses.hpp"
#include "fairexpr/random.hpp"

namespace fairexpr {
namespace {

constexpr double kTol = 1e-9;

Tensor rows(std::size_t cols, std::vector<double> values) {
  const std::size_t n = values.size() / cols;
  return Tensor({n, cols}, std::move(values));
}

Tensor random_simplex_rows(std::size_t n, std::size_t k, Rng& rng) {
  Tensor t({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      t.at(r, c) = -std::log(1.0 - rng.uniform());
      sum += t.at(r, c);
    }
    for (std::size_t c = 0; c < k; ++c) t.at(r, c) /= sum;
  }
  return t;
}

TEST(ExpressionLoss, Examples) {
  EXPECT_NEAR(expression_loss(rows(3, {1, 0, 0, 0, 0, 1}), std::vector<int>{0, 2}), 0.0, kTol);
  EXPECT_NEAR(expression_loss(Tensor({1, 7}, 1.0 / 7.0), std::vector<int>{4}), std::log(7.0), kTol);
  EXPECT_NEAR(std::log(7.0), 1.9459, 1e-4);
  const double two = expression_loss(rows(2, {0.5, 0.5, 0.75, 0.25}), std::vector<int>{0, 1});
  EXPECT_NEAR(two, (std::log(2.0) + std::log(4.0)) / 2.0, kTol);
  EXPECT_NEAR(two, 1.0397, 1e-4);
}

TEST(ExpressionLoss, ClampsZeroProbability) {
  EXPECT_NEAR(expression_loss(rows(2, {1, 0}), std::vector<int>{1}), -std::log(kProbabilityFloor), kTol);
}

TEST(ExpressionLoss, LabelOutOfRange) {
  EXPECT_THROW(expression_loss(rows(2, {0.5, 0.5}), std::vector<int>{2}), ValidationError);
  EXPECT_THROW(expression_loss(rows(2, {0.5, 0.5}), std::vector<int>{-1}), ValidationError);
}

TEST(ConfusionLoss, Examples) {
  const AttributeSchema one({{"g", {"a", "b"}}});
  EXPECT_NEAR(confusion_loss({rows(2, {0.5, 0.5})}, one), std::log(2.0), kTol);
  EXPECT_NEAR(confusion_loss({rows(2, {0.9, 0.1})}, one), -(0.5 * std::log(0.9) + 0.5 * std::log(0.1)), kTol);
  EXPECT_NEAR(confusion_loss({rows(2, {0.9, 0.1})}, one), 1.2040, 1e-4);
  const AttributeSchema two({{"g", {"a", "b"}}, {"h", {"x", "y", "z"}}});
  EXPECT_NEAR(confusion_loss({rows(2, {0.5, 0.5}), rows(3, {1 / 3.0, 1 / 3.0, 1 / 3.0})}, two),
              std::log(2.0) + std::log(3.0), kTol);
}

TEST(ConfusionLoss, WidthMismatch) {
  const AttributeSchema one({{"g", {"a", "b"}}});
  EXPECT_THROW(confusion_loss({rows(3, {0.2, 0.3, 0.5})}, one), ValidationError);
  EXPECT_THROW(confusion_loss({}, one), ValidationError);
}

TEST(ConfusionLoss, GibbsLowerBound) {
  const auto schema = AttributeSchema::raf_default();
  const double floor = std::log(3.0) + std::log(2.0) + std::log(5.0);
  std::vector<Tensor> uniform;
  for (const auto& g : schema.groups()) uniform.emplace_back(Shape{4, g.size()}, 1.0 / static_cast<double>(g.size()));
  EXPECT_NEAR(confusion_loss(uniform, schema), floor, kTol);
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tensor> probs;
    for (const auto& g : schema.groups()) probs.push_back(random_simplex_rows(5, g.size(), rng));
    EXPECT_GE(confusion_loss(probs, schema), floor - kTol);
  }
}

TEST(AttributeLoss, Examples) {
  EXPECT_NEAR(attribute_loss({rows(2, {0, 1}), rows(3, {1, 0, 0})}, {{1}, {0}}), 0.0, kTol);
  std::vector<Tensor> uniform{Tensor({1, 2}, 0.5), Tensor({1, 3}, 1 / 3.0), Tensor({1, 5}, 0.2)};
  const double v = attribute_loss(uniform, {{0}, {2}, {4}});
  EXPECT_NEAR(v, std::log(2.0) + std::log(3.0) + std::log(5.0), kTol);
  EXPECT_NEAR(v, 3.4012, 1e-4);
  EXPECT_NEAR(attribute_loss({rows(2, {0.75, 0.25})}, {{1}}), std::log(4.0), kTol);
}

TEST(AttributeLoss, InvalidLabels) {
  EXPECT_THROW(attribute_loss({rows(2, {0.5, 0.5})}, {{2}}), ValidationError);
  EXPECT_THROW(attribute_loss({rows(2, {0.5, 0.5})}, {}), ValidationError);
}

TEST(TotalLoss, Examples) {
  const auto a = total_loss(0.5, 0.3, 0.7, 1.0);
  EXPECT_NEAR(a.total, 1.5, kTol);
  EXPECT_EQ(a.alpha, 1.0);
  EXPECT_NEAR(total_loss(0.4, 0.2, 9.0, 0.0).total, 0.6, kTol);
  EXPECT_NEAR(total_loss(1.0, 1.0, 2.0, 0.5).total, 3.0, kTol);
}

TEST(TotalLoss, NanNamesComponent) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    total_loss(0.1, nan, 0.2, 1.0);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("'s'"), std::string::npos);
  }
  EXPECT_THROW(total_loss(nan, 0.0, 0.0, 1.0), NumericError);
  EXPECT_THROW(total_loss(0.0, 0.0, nan, 1.0), NumericError);
}

TEST(Losses, NonnegativeAndPermutationInvariant) {
  Rng rng(4);
  const auto schema = AttributeSchema::raf_default();
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 6;
    Tensor p = random_simplex_rows(n, 7, rng);
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.uniform_int(0, 6));
    std::vector<Tensor> groups;
    AttributeLabels labels;
    for (const auto& g : schema.groups()) {
      groups.push_back(random_simplex_rows(n, g.size(), rng));
      std::vector<int> l(n);
      for (auto& v : l) v = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(g.size()) - 1));
      labels.push_back(l);
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    shuffle(perm.begin(), perm.end(), rng);
    auto permute = [&](const Tensor& t) {
      Tensor out(t.shape());
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < t.dim(1); ++c) out.at(r, c) = t.at(perm[r], c);
      return out;
    };
    std::vector<int> y2(n);
    AttributeLabels labels2(labels.size(), std::vector<int>(n));
    std::vector<Tensor> groups2;
    for (std::size_t r = 0; r < n; ++r) {
      y2[r] = y[perm[r]];
      for (std::size_t j = 0; j < labels.size(); ++j) labels2[j][r] = labels[j][perm[r]];
    }
    for (const auto& g : groups) groups2.push_back(permute(g));

    const double e = expression_loss(p, y);
    const double s = attribute_loss(groups, labels);
    const double c = confusion_loss(groups, schema);
    EXPECT_GE(e, 0.0);
    EXPECT_GE(s, 0.0);
    EXPECT_GE(c, 0.0);
    EXPECT_NEAR(expression_loss(permute(p), y2), e, 1e-12);
    EXPECT_NEAR(attribute_loss(groups2, labels2), s, 1e-12);
    EXPECT_NEAR(confusion_loss(groups2, schema), c, 1e-12);
  }
}

// Central differences on the probability inputs.
TEST(LossGradients, MatchFiniteDifferences) {
  Rng rng(8);
  const AttributeSchema schema({{"g", {"a", "b"}}, {"h", {"x", "y", "z"}}});
  Tensor p = random_simplex_rows(3, 4, rng);
  const std::vector<int> y{0, 3, 1};
  std::vector<Tensor> groups{random_simplex_rows(3, 2, rng), random_simplex_rows(3, 3, rng)};
  const AttributeLabels labels{{0, 1, 1}, {2, 0, 1}};
  const double h = 1e-6;

  const Tensor ge = expression_loss_grad(p, y);
  for (std::size_t i = 0; i < p.size(); ++i) {
    Tensor a = p;
    Tensor b = p;
    a[i] += h;
    b[i] -= h;
    EXPECT_NEAR(ge[i], (expression_loss(a, y) - expression_loss(b, y)) / (2 * h), 1e-6);
  }
  const auto gs = attribute_loss_grad(groups, labels);
  const auto gc = confusion_loss_grad(groups, schema);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    for (std::size_t i = 0; i < groups[j].size(); ++i) {
      auto a = groups;
      auto b = groups;
      a[j][i] += h;
      b[j][i] -= h;
      EXPECT_NEAR(gs[j][i], (attribute_loss(a, labels) - attribute_loss(b, labels)) / (2 * h), 1e-6);
      EXPECT_NEAR(gc[j][i], (confusion_loss(a, schema) - confusion_loss(b, schema)) / (2 * h), 1e-6);
    }
  }
}

}  // namespace
}  // namespace fairexpr
