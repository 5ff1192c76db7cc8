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

#ifndef FAIREXPR_FAIRNESS_HPP_
#define FAIREXPR_FAIRNESS_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairexpr/schema.hpp"

namespace fairexpr {

/// One evaluated sample.
struct PredictionRecord {
  std::string id;
  int truth = 0;
  int predicted = 0;
  std::vector<double> probs;
  /// Category index per schema group.
  std::vector<int> attributes;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// A subgroup: one category for each participating schema group.
struct SubgroupKey {
  std::vector<std::size_t> groups;
  std::vector<int> categories;

  bool matches(const PredictionRecord& r) const;
  /// Category names joined with '-', e.g. "Male-Caucasian".
  std::string label(const AttributeSchema& schema) const;

  friend auto operator<=>(const SubgroupKey&, const SubgroupKey&) = default;
};

/// Every category combination of `groups`, first group varying slowest.
std::vector<SubgroupKey> enumerate_subgroups(const AttributeSchema& schema, std::span<const std::size_t> groups);

/// "gender" -> "Gender"; {gender, race} -> "G-R".
std::string grouping_display_name(const AttributeSchema& schema, std::span<const std::size_t> groups);

using RecallMap = std::map<int, double>;

/// Recall per class present among `records` (optionally restricted to a
/// subgroup). Classes with no true samples are omitted; nullopt when no
/// record passes the filter.
std::optional<RecallMap> per_class_recall(std::span<const PredictionRecord> records,
                                          const SubgroupKey* subgroup = nullptr);
/// Mean over the classes in the map; nullopt when empty.
std::optional<double> mean_recall(const RecallMap& recall);
double overall_accuracy(std::span<const PredictionRecord> records);

struct FairnessValue {
  std::optional<double> value;
  std::string diagnostic;
};

/// min(s0, s1) / max(s0, s1). Undefined when either sum is zero.
FairnessValue fairness_binary(double sum0, double sum1);

struct SubgroupSum {
  SubgroupKey key;
  /// nullopt: the subgroup has no evaluation samples.
  std::optional<double> sum;
};

struct MultiFairness {
  std::optional<double> value;
  /// Position in the input of the dominant subgroup (largest sum, first on ties).
  std::optional<std::size_t> dominant;
  /// Positions of subgroups without samples.
  std::vector<std::size_t> excluded;
  std::string diagnostic;
};

/// min over subgroups of sum / sum_dominant. Needs at least two subgroups
/// with samples and every such sum positive.
MultiFairness fairness_multi(std::span<const SubgroupSum> sums);

struct SubgroupStats {
  SubgroupKey key;
  std::string label;
  std::size_t support = 0;
  RecallMap recall;
  std::optional<double> mean_accuracy;
};

struct GroupingResult {
  std::vector<std::size_t> groups;
  /// "gender", or group names joined with '+' for joint groupings.
  std::string name;
  std::string display_name;
  std::vector<SubgroupStats> subgroups;
  /// Classes present in every subgroup with samples; recall sums run over these.
  std::vector<int> restricted_classes;
  std::vector<std::optional<double>> sums;
  std::optional<double> fairness;
  std::optional<std::string> dominant;
  std::vector<std::string> excluded;
  std::vector<std::string> low_support;
  std::string diagnostic;
};

struct ReportOptions {
  /// Joint groupings by group name, e.g. {{"gender", "race"}}.
  std::vector<std::vector<std::string>> joint_groupings;
  /// Subgroups with fewer samples are flagged low-support.
  std::size_t min_support = 1;
};

struct FairnessReport {
  std::size_t num_records = 0;
  int num_classes = 0;
  std::vector<std::string> class_names;
  AttributeSchema schema;
  double overall_accuracy = 0.0;
  RecallMap per_class_recall;
  std::optional<double> mean_class_accuracy;
  /// Single groups in schema order, then the joint groupings.
  std::vector<GroupingResult> groupings;
};

GroupingResult evaluate_grouping(std::span<const PredictionRecord> records, const AttributeSchema& schema,
                                 std::vector<std::size_t> groups, std::size_t min_support = 1);

FairnessReport build_report(std::span<const PredictionRecord> records, const AttributeSchema& schema,
                            const ExpressionVocab& vocab, const ReportOptions& options = {});

/// Deterministic JSON rendering (fixed key order, shortest round-trip numbers).
std::string report_to_json(const FairnessReport& report);
FairnessReport report_from_json(const std::string& text);
std::string report_to_markdown(const FairnessReport& report, const std::string& title = "Evaluation report");

}  // namespace fairexpr

#endif  // FAIREXPR_FAIRNESS_HPP_
