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

#include "fairexpr/compare.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "fairexpr/errors.hpp"
#include "json_util.hpp"

namespace fairexpr {
namespace {

int approach_rank(HeadKind k) {
  switch (k) {
    case HeadKind::baseline: return 0;
    case HeadKind::attribute_aware: return 1;
    case HeadKind::disentangled: return 2;
  }
  return 3;
}

std::string augmentation_label(bool on) { return on ? "With Augmentation" : "Without Augmentation"; }

std::string cell_text(const std::optional<double>& v, bool percent) {
  if (!v) return "-";
  std::ostringstream os;
  if (percent) {
    os << std::fixed << std::setprecision(1) << *v * 100.0 << '%';
  } else {
    os << std::fixed << std::setprecision(3) << *v;
  }
  return os.str();
}

std::optional<double> best_of(const std::vector<std::optional<double>>& values) {
  std::optional<double> best;
  for (const auto& v : values) {
    if (v && (!best || *v > *best)) best = v;
  }
  return best;
}

const GroupingResult* find_grouping(const FairnessReport& r, const std::string& name) {
  for (const auto& g : r.groupings) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

}  // namespace

std::string approach_label(HeadKind kind) {
  switch (kind) {
    case HeadKind::baseline: return "Baseline";
    case HeadKind::attribute_aware: return "Attri-aware";
    case HeadKind::disentangled: return "Disentangle";
  }
  return "?";
}

ComparisonMatrix build_comparison(std::vector<ComparisonColumn> columns) {
  if (columns.size() < 2) throw ValidationError("compare needs at least two runs");
  for (const auto& c : columns) {
    if (c.report.class_names != columns.front().report.class_names || !(c.report.schema == columns.front().report.schema)) {
      throw ValidationError("run '" + c.run + "' uses different classes or attribute groups than '" +
                            columns.front().run + "'");
    }
  }
  std::stable_sort(columns.begin(), columns.end(), [](const auto& a, const auto& b) {
    if (a.augmented != b.augmented) return !a.augmented;
    return approach_rank(a.approach) < approach_rank(b.approach);
  });

  ComparisonMatrix m;
  const auto& first = columns.front().report;

  ComparisonTable classes{"Class-wise accuracy", {}, true};
  {
    ComparisonTable::Row mean{"Mean", false, {}};
    for (const auto& c : columns) mean.values.push_back(c.report.mean_class_accuracy);
    classes.rows.push_back(std::move(mean));
    for (std::size_t k = 0; k < first.class_names.size(); ++k) {
      ComparisonTable::Row row{first.class_names[k], false, {}};
      for (const auto& c : columns) {
        auto it = c.report.per_class_recall.find(static_cast<int>(k));
        row.values.push_back(it == c.report.per_class_recall.end() ? std::nullopt : std::optional<double>(it->second));
      }
      classes.rows.push_back(std::move(row));
    }
  }

  ComparisonTable subgroups{"Mean class-wise accuracy by subgroup", {}, true};
  ComparisonTable fairness{"Fairness", {}, false};
  for (const auto& g : first.groupings) {
    subgroups.rows.push_back({g.display_name, true, {}});
    for (std::size_t i = 0; i < g.subgroups.size(); ++i) {
      ComparisonTable::Row row{g.subgroups[i].label, false, {}};
      for (const auto& c : columns) {
        const auto* cg = find_grouping(c.report, g.name);
        row.values.push_back(cg && i < cg->subgroups.size() ? cg->subgroups[i].mean_accuracy : std::nullopt);
      }
      subgroups.rows.push_back(std::move(row));
    }
    ComparisonTable::Row frow{g.display_name, false, {}};
    for (const auto& c : columns) {
      const auto* cg = find_grouping(c.report, g.name);
      frow.values.push_back(cg ? cg->fairness : std::nullopt);
    }
    fairness.rows.push_back(std::move(frow));
  }
  m.columns = std::move(columns);
  m.tables = {std::move(classes), std::move(subgroups), std::move(fairness)};
  return m;
}

std::string comparison_markdown(const ComparisonMatrix& m) {
  std::ostringstream os;
  os << "# Approach comparison\n\nRuns:\n\n";
  for (std::size_t i = 0; i < m.columns.size(); ++i) {
    const auto& c = m.columns[i];
    os << "- " << augmentation_label(c.augmented) << " / " << approach_label(c.approach) << ": `" << c.run << "`\n";
  }
  for (const auto& t : m.tables) {
    os << "\n## " << t.title << "\n\n|  |";
    for (const auto& c : m.columns) os << ' ' << augmentation_label(c.augmented) << "<br>" << approach_label(c.approach) << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < m.columns.size(); ++i) os << "---|";
    os << '\n';
    for (const auto& row : t.rows) {
      if (row.section) {
        os << "| **" << row.label << "** |";
        for (std::size_t i = 0; i < m.columns.size(); ++i) os << " |";
        os << '\n';
        continue;
      }
      const auto best = best_of(row.values);
      os << "| " << row.label << " |";
      for (const auto& v : row.values) {
        const auto text = cell_text(v, t.percent);
        if (v && best && *v == *best) {
          os << " **" << text << "** |";
        } else {
          os << ' ' << text << " |";
        }
      }
      os << '\n';
    }
  }
  return os.str();
}

std::string comparison_text(const ComparisonMatrix& m) {
  std::ostringstream os;
  constexpr int kLabel = 24;
  constexpr int kCell = 13;
  for (const auto& t : m.tables) {
    os << t.title << '\n';
    // First header level: augmentation, spanning its approach columns.
    os << std::left << std::setw(kLabel) << "";
    for (std::size_t i = 0; i < m.columns.size();) {
      std::size_t j = i;
      while (j < m.columns.size() && m.columns[j].augmented == m.columns[i].augmented) ++j;
      os << std::left << std::setw(static_cast<int>((j - i) * kCell)) << augmentation_label(m.columns[i].augmented);
      i = j;
    }
    os << '\n' << std::left << std::setw(kLabel) << "";
    for (const auto& c : m.columns) os << std::left << std::setw(kCell) << approach_label(c.approach);
    os << '\n';
    for (const auto& row : t.rows) {
      os << std::left << std::setw(kLabel) << row.label;
      if (!row.section) {
        for (const auto& v : row.values) os << std::left << std::setw(kCell) << cell_text(v, t.percent);
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

std::string comparison_json(const ComparisonMatrix& m) {
  using detail::Json;
  Json j;
  Json cols = Json::array();
  for (const auto& c : m.columns) {
    cols.push_back({{"run", c.run},
                    {"approach", std::string(to_string(c.approach))},
                    {"augmentation", c.augmented}});
  }
  j["columns"] = cols;
  Json tables = Json::array();
  for (const auto& t : m.tables) {
    Json tj;
    tj["title"] = t.title;
    Json rows = Json::array();
    for (const auto& r : t.rows) {
      Json rj;
      rj["label"] = r.label;
      if (r.section) {
        rj["section"] = true;
      } else {
        Json vals = Json::array();
        for (const auto& v : r.values) vals.push_back(v ? Json(*v) : Json(nullptr));
        rj["values"] = vals;
      }
      rows.push_back(rj);
    }
    tj["rows"] = rows;
    tables.push_back(tj);
  }
  j["tables"] = tables;
  return j.dump(2) + "\n";
}

}  // namespace fairexpr
