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

#ifndef FAIREXPR_COMPARE_HPP_
#define FAIREXPR_COMPARE_HPP_

#include <optional>
#include <string>
#include <vector>

#include "fairexpr/fairness.hpp"
#include "fairexpr/model.hpp"

namespace fairexpr {

struct ComparisonColumn {
  std::string run;
  HeadKind approach = HeadKind::baseline;
  bool augmented = false;
  FairnessReport report;
};

/// One table: rows are classes or subgroups, columns are runs ordered by
/// augmentation (off, then on) and approach (baseline, attribute-aware,
/// disentangled).
struct ComparisonTable {
  std::string title;
  struct Row {
    std::string label;
    /// Section heading rows carry no values.
    bool section = false;
    std::vector<std::optional<double>> values;
  };
  std::vector<Row> rows;
  /// Cells are fractions shown as percentages; otherwise plain ratios.
  bool percent = true;
};

struct ComparisonMatrix {
  std::vector<ComparisonColumn> columns;
  /// Class-wise accuracy, subgroup accuracy, fairness.
  std::vector<ComparisonTable> tables;
};

/// "Baseline", "Attri-aware", "Disentangle".
std::string approach_label(HeadKind kind);

/// Sorts the columns and builds the three tables. Throws ValidationError
/// when fewer than two runs are given or their class lists or schemas differ.
ComparisonMatrix build_comparison(std::vector<ComparisonColumn> columns);

/// Markdown with the best cell of each row in bold.
std::string comparison_markdown(const ComparisonMatrix& m);
/// Aligned plain text with a two-level header (augmentation, approach).
std::string comparison_text(const ComparisonMatrix& m);
std::string comparison_json(const ComparisonMatrix& m);

}  // namespace fairexpr

#endif  // FAIREXPR_COMPARE_HPP_
