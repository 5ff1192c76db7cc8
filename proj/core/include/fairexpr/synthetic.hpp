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

#ifndef FAIREXPR_SYNTHETIC_HPP_
#define FAIREXPR_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fairexpr/ingestion.hpp"
#include "fairexpr/schema.hpp"

namespace fairexpr {

/// Synthetic dataset with a controllable class/attribute correlation.
///
/// The class is rendered as an oriented sinusoidal grating (orientation
/// pi * k / K) below a tint band; every attribute group owns one segment of
/// the band, coloured by its category. A biased group takes its class-linked
/// category with probability rho and otherwise draws from its marginals;
/// unbiased groups always draw from their marginals. Each grating is mixed
/// with a distractor grating of another class at weight 1 - clarity, where
/// clarity ~ U(clarity_min, 1). Per-pixel Gaussian noise is added everywhere.
struct SynthConfig {
  int n_samples = 1000;
  int image_side = 100;
  AttributeSchema schema = AttributeSchema::raf_default();
  /// Class names; K = vocab.size().
  ExpressionVocab vocab = raf_expression_vocab();
  /// rho per biased group name.
  std::map<std::string, double> bias;
  /// Category probabilities per group name; missing groups use default_marginals.
  std::map<std::string, std::vector<double>> marginals;
  /// Class -> linked category per group name; missing groups use default_link.
  std::map<std::string, std::vector<int>> link;
  double noise_std = 0.05;
  /// Tint saturation: 0 is plain grey, 1 the full palette colour.
  double cue_strength = 1.0;
  /// Std of a per-sample colour offset shared by the whole band segment.
  double cue_jitter = 0.0;
  double amplitude = 0.3;
  double clarity_min = 0.5;
  std::uint64_t seed = 0;
  std::string id_prefix = "synth";

  int num_classes() const noexcept { return static_cast<int>(vocab.size()); }
  /// Throws ValidationError for inconsistent widths or out-of-range values.
  void validate() const;
  std::vector<double> marginals_for(std::size_t group) const;
  std::vector<int> link_for(std::size_t group) const;
};

/// Race / gender / age groups of the default schema get the RAF-DB test set
/// proportions; any other group is uniform.
std::vector<double> default_marginals(const AttributeGroup& group);
/// Class c links to category min(c, |S| - 1).
std::vector<int> default_link(int num_classes, std::size_t num_categories);

struct SynthDataset {
  std::vector<Sample> samples;
  /// Manifest rows with image paths relative to the dataset directory.
  std::vector<ManifestRow> rows;
};

/// Deterministic per seed. Sample i draws from Rng::derive(seed, i), so the
/// output does not depend on generation order. Pixels are already 8-bit
/// quantised, matching what load_manifest returns for the written PNGs.
SynthDataset generate(const SynthConfig& cfg);

/// Writes `<dir>/manifest.csv` and `<dir>/images/<id>.png`.
void write_dataset(const std::filesystem::path& dir, const SynthConfig& cfg, const SynthDataset& data);

struct ContingencyTable {
  std::string group;
  /// counts[class][category]
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  /// Share of each category over all classes.
  std::vector<double> category_marginals() const;
};

struct BiasAudit {
  std::size_t n_samples = 0;
  std::vector<ContingencyTable> tables;
};

BiasAudit bias_audit(const std::vector<Sample>& samples, const AttributeSchema& schema, int num_classes);
/// Plug-in estimate in nats.
double mutual_information(const ContingencyTable& table);
std::string audit_to_markdown(const BiasAudit& audit, const AttributeSchema& schema, const ExpressionVocab& vocab);
std::string audit_to_csv(const BiasAudit& audit, const AttributeSchema& schema, const ExpressionVocab& vocab);

}  // namespace fairexpr

#endif  // FAIREXPR_SYNTHETIC_HPP_
