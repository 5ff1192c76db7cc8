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

#ifndef FAIREXPR_TESTS_ACCEPTANCE_MITIGATION_HPP_
#define FAIREXPR_TESTS_ACCEPTANCE_MITIGATION_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fairexpr::acceptance {

struct MitigationSettings {
  int train_size = 6000;
  int val_size = 750;
  int test_size = 1500;
  int probe_size = 1000;
  int image_side = 48;
  int crop = 40;
  double rho = 0.95;
  std::vector<double> marginals{0.8, 0.2};
  double cue_strength = 0.5;
  double cue_jitter = 0.16;
  int max_epochs = 6;
  int sanity_epochs = 2;
  std::vector<double> alpha_grid{0.5, 1.0, 2.0};
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<double> baseline_f;
  std::optional<double> disentangled_f;
  double baseline_probe = 0.0;
  double disentangled_probe = 0.0;
  double baseline_accuracy = 0.0;
  double disentangled_accuracy = 0.0;
};

struct MitigationOutcome {
  double selected_alpha = 0.0;
  std::vector<std::pair<double, std::optional<double>>> alpha_validation_f;
  double sanity_accuracy = 0.0;
  std::vector<SeedOutcome> seeds;
  double seconds = 0.0;
};

MitigationOutcome run_mitigation(const MitigationSettings& settings,
                                 const std::function<void(const std::string&)>& log);

}  // namespace fairexpr::acceptance

#endif  // FAIREXPR_TESTS_ACCEPTANCE_MITIGATION_HPP_
