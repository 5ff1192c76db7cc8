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

#include "fairexpr/losses.hpp"

#include <cmath>
#include <string>

#include "fairexpr/errors.hpp"

namespace fairexpr {
namespace {

double clamped(double p) { return p < kProbabilityFloor ? kProbabilityFloor : p; }
// d(-log clamp(p))/dp; zero where the clamp is active.
double neg_log_grad(double p) { return p < kProbabilityFloor ? 0.0 : -1.0 / p; }

void check_probs(const Tensor& probs, const char* who) {
  if (probs.rank() != 2) throw ValidationError(std::string(who) + ": probabilities must be rank 2");
}

void check_labels(const Tensor& probs, std::span<const int> labels, const char* who) {
  check_probs(probs, who);
  if (labels.size() != probs.dim(0)) {
    throw ValidationError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(probs.dim(0)) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= probs.dim(1)) {
      throw ValidationError(std::string(who) + ": label " + std::to_string(y) + " out of range [0," +
                            std::to_string(probs.dim(1)) + ")");
    }
  }
}

void check_groups(const std::vector<Tensor>& group_probs, const AttributeSchema& schema) {
  if (group_probs.size() != schema.size()) {
    throw ValidationError("confusion_loss: " + std::to_string(group_probs.size()) + " branches for " +
                          std::to_string(schema.size()) + " groups");
  }
  for (std::size_t j = 0; j < group_probs.size(); ++j) {
    check_probs(group_probs[j], "confusion_loss");
    if (group_probs[j].dim(1) != schema.group(j).size()) {
      throw ValidationError("confusion_loss: group '" + schema.group(j).name + "' has width " +
                            std::to_string(group_probs[j].dim(1)) + ", expected " +
                            std::to_string(schema.group(j).size()));
    }
    if (group_probs[j].dim(0) != group_probs[0].dim(0)) throw ValidationError("confusion_loss: batch mismatch");
  }
}

}  // namespace

double expression_loss(const Tensor& probs, std::span<const int> labels) {
  check_labels(probs, labels, "expression_loss");
  const std::size_t n = probs.dim(0);
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum -= std::log(clamped(probs.at(i, static_cast<std::size_t>(labels[i]))));
  return sum / static_cast<double>(n);
}

Tensor expression_loss_grad(const Tensor& probs, std::span<const int> labels) {
  check_labels(probs, labels, "expression_loss");
  const std::size_t n = probs.dim(0);
  Tensor g(probs.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    g.at(i, y) = neg_log_grad(probs.at(i, y)) / static_cast<double>(n);
  }
  return g;
}

double confusion_loss(const std::vector<Tensor>& group_probs, const AttributeSchema& schema) {
  check_groups(group_probs, schema);
  if (group_probs.empty() || group_probs[0].dim(0) == 0) return 0.0;
  const std::size_t n = group_probs[0].dim(0);
  double sum = 0.0;
  for (const auto& p : group_probs) {
    const double w = 1.0 / static_cast<double>(p.dim(1));
    for (std::size_t i = 0; i < p.size(); ++i) sum -= w * std::log(clamped(p[i]));
  }
  return sum / static_cast<double>(n);
}

std::vector<Tensor> confusion_loss_grad(const std::vector<Tensor>& group_probs, const AttributeSchema& schema) {
  check_groups(group_probs, schema);
  std::vector<Tensor> grads;
  for (const auto& p : group_probs) {
    Tensor g(p.shape());
    const double scale = 1.0 / (static_cast<double>(p.dim(1)) * static_cast<double>(std::max<std::size_t>(p.dim(0), 1)));
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = scale * neg_log_grad(p[i]);
    grads.push_back(std::move(g));
  }
  return grads;
}

double attribute_loss(const std::vector<Tensor>& group_probs, const AttributeLabels& labels) {
  if (labels.size() != group_probs.size()) throw ValidationError("attribute_loss: group count mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < group_probs.size(); ++j) total += expression_loss(group_probs[j], labels[j]);
  return total;
}

std::vector<Tensor> attribute_loss_grad(const std::vector<Tensor>& group_probs, const AttributeLabels& labels) {
  if (labels.size() != group_probs.size()) throw ValidationError("attribute_loss: group count mismatch");
  std::vector<Tensor> grads;
  for (std::size_t j = 0; j < group_probs.size(); ++j) grads.push_back(expression_loss_grad(group_probs[j], labels[j]));
  return grads;
}

LossBreakdown total_loss(double exp, double s, double conf, double alpha) {
  const std::pair<const char*, double> parts[] = {{"exp", exp}, {"s", s}, {"conf", conf}, {"alpha", alpha}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw NumericError(std::string("loss component '") + name + "' is not finite");
  }
  return LossBreakdown{exp, s, conf, exp + s + alpha * conf, alpha};
}

}  // namespace fairexpr
