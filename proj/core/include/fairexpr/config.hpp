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

#ifndef FAIREXPR_CONFIG_HPP_
#define FAIREXPR_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairexpr/fairness.hpp"
#include "fairexpr/ingestion.hpp"
#include "fairexpr/model.hpp"
#include "fairexpr/synthetic.hpp"
#include "fairexpr/trainer.hpp"

namespace fairexpr {

struct DatasetSection {
  /// Exactly one of `manifest` and `synth` is set.
  std::optional<std::filesystem::path> manifest;
  std::optional<SynthConfig> synth;
  /// Where `fairexpr synth` writes (and `train` reads) the synthetic dataset.
  std::filesystem::path synth_dir;
  ManifestOptions loading;
  /// Used when the manifest has no split column.
  SplitFractions split;
};

struct ModelSection {
  BackboneVariant backbone = BackboneVariant::tiny;
  int feature_dim = 64;
  std::vector<int> tiny_channels{8, 16, 32};
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/experiment";
  DatasetSection dataset;
  AttributeSchema schema = AttributeSchema::raf_default();
  ExpressionVocab vocab = raf_expression_vocab();
  ModelSection model;
  /// Carries approach, alpha, augmentation and the seed.
  TrainConfig train;
  std::optional<GradientPolicy> gradient_policy;
  ReportOptions report;

  /// Cross-field checks; throws ConfigError with a dotted field path.
  void validate() const;
  ModelSpec model_spec() const;
  /// Path of the manifest that `train` and `eval` read.
  std::filesystem::path manifest_path() const;
};

/// Parses YAML. Relative paths resolve against `base_dir`. Unknown keys,
/// wrong types and invalid values raise ConfigError naming the field.
ExperimentConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical YAML with every default filled in; parse_config of the result
/// yields an equal configuration.
std::string resolved_yaml(const ExperimentConfig& cfg);

}  // namespace fairexpr

#endif  // FAIREXPR_CONFIG_HPP_
