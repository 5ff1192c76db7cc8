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

#ifndef FAIREXPR_OPTIMIZER_HPP_
#define FAIREXPR_OPTIMIZER_HPP_

#include <string_view>
#include <vector>

#include "fairexpr/model.hpp"
#include "fairexpr/nn.hpp"

namespace fairexpr {

/// Updates trainable parameters that have a gradient entry. Parameters
/// without an entry (empty tensor) are left untouched, moments included.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(ParameterStore& params, const GradientSet& grads) = 0;
  double learning_rate() const noexcept { return lr_; }
  void set_learning_rate(double lr) noexcept { lr_ = lr; }

 protected:
  explicit Optimizer(double lr) : lr_(lr) {}
  double lr_;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : Optimizer(lr) {}
  void step(ParameterStore& params, const GradientSet& grads) override;
};

/// Adam with bias correction and per-parameter step counts.
class Adam final : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : Optimizer(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParameterStore& params, const GradientSet& grads) override;

 private:
  struct Slot {
    Tensor m, v;
    long t = 0;
  };
  double beta1_, beta2_, eps_;
  std::vector<Slot> slots_;
};

/// Routes `grads` through the bundle's policy for `loss` and applies the
/// result. Parameters outside the routed partitions stay bit-identical.
/// Throws ConfigError when the policy has no entry for `loss`.
void apply_gradients(ModelBundle& bundle, std::string_view loss, const GradientSet& grads, Optimizer& optimizer);

}  // namespace fairexpr

#endif  // FAIREXPR_OPTIMIZER_HPP_
