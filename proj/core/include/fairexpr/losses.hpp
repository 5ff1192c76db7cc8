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

#ifndef FAIREXPR_LOSSES_HPP_
#define FAIREXPR_LOSSES_HPP_

#include <span>
#include <vector>

#include "fairexpr/schema.hpp"
#include "fairexpr/tensor.hpp"

namespace fairexpr {

/// Probabilities are clamped below at this value before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

/// Attribute labels indexed [group][sample].
using AttributeLabels = std::vector<std::vector<int>>;

/// Mean over the batch of -log p_{y_i}.
double expression_loss(const Tensor& probs, std::span<const int> labels);
/// dL/dprobs for expression_loss.
Tensor expression_loss_grad(const Tensor& probs, std::span<const int> labels);

/// Cross-entropy of each attribute branch against the uniform distribution:
/// mean over the batch of sum_j sum_{s in S_j} -(1/|S_j|) log p_s.
double confusion_loss(const std::vector<Tensor>& group_probs, const AttributeSchema& schema);
std::vector<Tensor> confusion_loss_grad(const std::vector<Tensor>& group_probs, const AttributeSchema& schema);

/// Mean over the batch of sum_j -log p_{y_{s,j}}.
double attribute_loss(const std::vector<Tensor>& group_probs, const AttributeLabels& labels);
std::vector<Tensor> attribute_loss_grad(const std::vector<Tensor>& group_probs, const AttributeLabels& labels);

struct LossBreakdown {
  double exp = 0.0;
  double s = 0.0;
  double conf = 0.0;
  double total = 0.0;
  double alpha = 1.0;
};

/// total = exp + s + alpha * conf. Throws NumericError naming the first
/// non-finite component.
LossBreakdown total_loss(double exp, double s, double conf, double alpha);

}  // namespace fairexpr

#endif  // FAIREXPR_LOSSES_HPP_
