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

#include "fairexpr/optimizer.hpp"

#include <cmath>

#include "fairexpr/errors.hpp"

namespace fairexpr {

void Sgd::step(ParameterStore& params, const GradientSet& grads) {
  if (grads.size() != params.size()) throw ValidationError("sgd: gradient set does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable || !grads.has(i)) continue;
    params[i].value.add_scaled(grads.get(i), -lr_);
  }
}

void Adam::step(ParameterStore& params, const GradientSet& grads) {
  if (grads.size() != params.size()) throw ValidationError("adam: gradient set does not match parameters");
  slots_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable || !grads.has(i)) continue;
    auto& slot = slots_[i];
    auto& value = params[i].value;
    const auto& g = grads.get(i);
    if (slot.m.empty()) {
      slot.m = Tensor(value.shape());
      slot.v = Tensor(value.shape());
    }
    ++slot.t;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(slot.t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(slot.t));
    double* w = value.data();
    double* m = slot.m.data();
    double* v = slot.v.data();
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void apply_gradients(ModelBundle& bundle, std::string_view loss, const GradientSet& grads, Optimizer& optimizer) {
  optimizer.step(bundle.params(), route(grads, bundle, loss));
}

}  // namespace fairexpr
