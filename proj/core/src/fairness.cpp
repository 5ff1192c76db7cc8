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

#include "fairexpr/fairness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <iterator>
#include <set>
#include <sstream>

#include "fairexpr/errors.hpp"
#include "json_util.hpp"

namespace fairexpr {

bool SubgroupKey::matches(const PredictionRecord& r) const {
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i] >= r.attributes.size() || r.attributes[groups[i]] != categories[i]) return false;
  }
  return true;
}

std::string SubgroupKey::label(const AttributeSchema& schema) const {
  std::string out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i) out += '-';
    out += schema.group(groups[i]).categories.at(static_cast<std::size_t>(categories[i]));
  }
  return out;
}

std::vector<SubgroupKey> enumerate_subgroups(const AttributeSchema& schema, std::span<const std::size_t> groups) {
  std::vector<SubgroupKey> keys{SubgroupKey{}};
  for (auto g : groups) {
    std::vector<SubgroupKey> next;
    for (const auto& key : keys) {
      for (std::size_t c = 0; c < schema.group(g).size(); ++c) {
        SubgroupKey k = key;
        k.groups.push_back(g);
        k.categories.push_back(static_cast<int>(c));
        next.push_back(std::move(k));
      }
    }
    keys = std::move(next);
  }
  return keys;
}

std::string grouping_display_name(const AttributeSchema& schema, std::span<const std::size_t> groups) {
  if (groups.size() == 1) {
    std::string name = schema.group(groups[0]).name;
    if (!name.empty()) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    return name;
  }
  std::string out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i) out += '-';
    const auto& name = schema.group(groups[i]).name;
    if (!name.empty()) out += static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  }
  return out;
}

std::optional<RecallMap> per_class_recall(std::span<const PredictionRecord> records, const SubgroupKey* subgroup) {
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // class -> (correct, total)
  for (const auto& r : records) {
    if (subgroup && !subgroup->matches(r)) continue;
    auto& c = counts[r.truth];
    ++c.second;
    if (r.predicted == r.truth) ++c.first;
  }
  if (counts.empty()) return std::nullopt;
  RecallMap out;
  for (const auto& [cls, c] : counts) out[cls] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

std::optional<double> mean_recall(const RecallMap& recall) {
  if (recall.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& [cls, v] : recall) s += v;
  return s / static_cast<double>(recall.size());
}

double overall_accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& r : records) correct += r.predicted == r.truth ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

FairnessValue fairness_binary(double sum0, double sum1) {
  if (!(sum0 > 0.0) || !(sum1 > 0.0)) {
    return {std::nullopt, "undefined: a subgroup has zero recall over the compared classes"};
  }
  return {std::min(sum0, sum1) / std::max(sum0, sum1), {}};
}

MultiFairness fairness_multi(std::span<const SubgroupSum> sums) {
  MultiFairness out;
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (sums[i].sum) {
      present.push_back(i);
    } else {
      out.excluded.push_back(i);
    }
  }
  if (present.size() < 2) {
    out.diagnostic = "undefined: fewer than two subgroups have evaluation samples";
    return out;
  }
  std::size_t d = present.front();
  for (auto i : present) {
    if (*sums[i].sum > *sums[d].sum) d = i;
  }
  out.dominant = d;
  for (auto i : present) {
    if (!(*sums[i].sum > 0.0)) {
      out.diagnostic = "undefined: a subgroup has zero recall over the compared classes";
      return out;
    }
  }
  double f = 1.0;
  for (auto i : present) f = std::min(f, *sums[i].sum / *sums[d].sum);
  out.value = f;
  return out;
}

GroupingResult evaluate_grouping(std::span<const PredictionRecord> records, const AttributeSchema& schema,
                                 std::vector<std::size_t> groups, std::size_t min_support) {
  GroupingResult g;
  for (auto idx : groups) {
    if (idx >= schema.size()) throw ValidationError("grouping references unknown group index");
    if (!g.name.empty()) g.name += '+';
    g.name += schema.group(idx).name;
  }
  g.display_name = grouping_display_name(schema, groups);
  g.groups = std::move(groups);

  for (auto& key : enumerate_subgroups(schema, g.groups)) {
    SubgroupStats s;
    s.label = key.label(schema);
    for (const auto& r : records) s.support += key.matches(r) ? 1 : 0;
    s.recall = per_class_recall(records, &key).value_or(RecallMap{});
    s.mean_accuracy = mean_recall(s.recall);
    s.key = std::move(key);
    g.subgroups.push_back(std::move(s));
  }

  std::optional<std::set<int>> common;
  for (const auto& s : g.subgroups) {
    if (s.support == 0) continue;
    std::set<int> present;
    for (const auto& [cls, v] : s.recall) present.insert(cls);
    if (!common) {
      common = std::move(present);
    } else {
      std::set<int> both;
      std::set_intersection(common->begin(), common->end(), present.begin(), present.end(),
                            std::inserter(both, both.begin()));
      common = std::move(both);
    }
  }
  if (common) g.restricted_classes.assign(common->begin(), common->end());

  std::vector<SubgroupSum> sums;
  for (const auto& s : g.subgroups) {
    SubgroupSum ss{s.key, std::nullopt};
    if (s.support > 0) {
      double total = 0.0;
      for (int cls : g.restricted_classes) total += s.recall.at(cls);
      ss.sum = total;
    }
    g.sums.push_back(ss.sum);
    sums.push_back(std::move(ss));
    if (s.support > 0 && s.support < min_support) g.low_support.push_back(s.label);
  }

  auto mf = fairness_multi(sums);
  for (auto i : mf.excluded) g.excluded.push_back(g.subgroups[i].label);
  if (common && g.restricted_classes.empty()) {
    g.diagnostic = "undefined: no expression class is present in every subgroup";
    return g;
  }
  g.fairness = mf.value;
  if (mf.dominant) g.dominant = g.subgroups[*mf.dominant].label;
  g.diagnostic = mf.diagnostic;
  if (g.diagnostic.empty() && !g.excluded.empty()) {
    g.diagnostic = "warning: subgroups without samples excluded";
  }
  return g;
}

FairnessReport build_report(std::span<const PredictionRecord> records, const AttributeSchema& schema,
                            const ExpressionVocab& vocab, const ReportOptions& options) {
  FairnessReport report;
  report.num_records = records.size();
  report.num_classes = static_cast<int>(vocab.size());
  report.class_names = vocab;
  report.schema = schema;
  for (const auto& r : records) {
    if (r.truth < 0 || r.truth >= report.num_classes || r.predicted < 0 || r.predicted >= report.num_classes) {
      throw ValidationError("prediction record '" + r.id + "' has a class outside the vocabulary");
    }
    validate_attributes(r.attributes, schema);
  }
  report.overall_accuracy = overall_accuracy(records);
  report.per_class_recall = per_class_recall(records).value_or(RecallMap{});
  report.mean_class_accuracy = mean_recall(report.per_class_recall);
  for (std::size_t j = 0; j < schema.size(); ++j) {
    report.groupings.push_back(evaluate_grouping(records, schema, {j}, options.min_support));
  }
  for (const auto& joint : options.joint_groupings) {
    std::vector<std::size_t> idx;
    for (const auto& name : joint) idx.push_back(schema.require(name));
    if (idx.size() < 2) throw ConfigError("joint grouping needs at least two groups", "report.joint_groupings");
    report.groupings.push_back(evaluate_grouping(records, schema, std::move(idx), options.min_support));
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

using detail::Json;

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

Json recall_to_json(const RecallMap& recall, const std::vector<std::string>& names) {
  Json out = Json::object();
  for (const auto& [cls, v] : recall) out[names.at(static_cast<std::size_t>(cls))] = v;
  return out;
}

RecallMap recall_from_json(const Json& j, const std::vector<std::string>& names) {
  RecallMap out;
  for (const auto& [name, v] : j.items()) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ValidationError("report references unknown class '" + name + "'");
    out[static_cast<int>(it - names.begin())] = v.get<double>();
  }
  return out;
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << *v * 100.0 << '%';
  return os.str();
}

std::string fixed3(const std::optional<double>& v) {
  if (!v) return "undefined";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << *v;
  return os.str();
}

}  // namespace

std::string report_to_json(const FairnessReport& report) {
  Json j;
  j["num_records"] = report.num_records;
  j["classes"] = report.class_names;
  j["schema"] = detail::schema_to_json(report.schema);
  j["overall_accuracy"] = report.overall_accuracy;
  j["mean_class_accuracy"] = optional_number(report.mean_class_accuracy);
  j["per_class_recall"] = recall_to_json(report.per_class_recall, report.class_names);
  Json groupings = Json::array();
  for (const auto& g : report.groupings) {
    Json gj;
    gj["name"] = g.name;
    gj["display_name"] = g.display_name;
    Json groups = Json::array();
    for (auto idx : g.groups) groups.push_back(report.schema.group(idx).name);
    gj["groups"] = groups;
    Json classes = Json::array();
    for (int c : g.restricted_classes) classes.push_back(report.class_names.at(static_cast<std::size_t>(c)));
    gj["restricted_classes"] = classes;
    gj["fairness"] = optional_number(g.fairness);
    gj["dominant"] = g.dominant ? Json(*g.dominant) : Json(nullptr);
    gj["excluded"] = g.excluded;
    gj["low_support"] = g.low_support;
    gj["diagnostic"] = g.diagnostic;
    Json subs = Json::array();
    for (std::size_t i = 0; i < g.subgroups.size(); ++i) {
      const auto& s = g.subgroups[i];
      Json sj;
      sj["label"] = s.label;
      sj["categories"] = s.key.categories;
      sj["support"] = s.support;
      sj["mean_accuracy"] = optional_number(s.mean_accuracy);
      sj["recall_sum"] = optional_number(g.sums[i]);
      sj["per_class_recall"] = recall_to_json(s.recall, report.class_names);
      subs.push_back(sj);
    }
    gj["subgroups"] = subs;
    groupings.push_back(gj);
  }
  j["groupings"] = groupings;
  return j.dump(2) + "\n";
}

FairnessReport report_from_json(const std::string& text) {
  FairnessReport r;
  try {
    const auto j = Json::parse(text);
    r.num_records = j.at("num_records").get<std::size_t>();
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    r.num_classes = static_cast<int>(r.class_names.size());
    r.schema = detail::schema_from_json(j.at("schema"));
    r.overall_accuracy = j.at("overall_accuracy").get<double>();
    r.mean_class_accuracy = read_optional(j.at("mean_class_accuracy"));
    r.per_class_recall = recall_from_json(j.at("per_class_recall"), r.class_names);
    for (const auto& gj : j.at("groupings")) {
      GroupingResult g;
      g.name = gj.at("name").get<std::string>();
      g.display_name = gj.at("display_name").get<std::string>();
      for (const auto& name : gj.at("groups")) g.groups.push_back(r.schema.require(name.get<std::string>()));
      for (const auto& name : gj.at("restricted_classes")) {
        auto it = std::find(r.class_names.begin(), r.class_names.end(), name.get<std::string>());
        if (it == r.class_names.end()) throw ValidationError("report references unknown class");
        g.restricted_classes.push_back(static_cast<int>(it - r.class_names.begin()));
      }
      g.fairness = read_optional(gj.at("fairness"));
      if (!gj.at("dominant").is_null()) g.dominant = gj.at("dominant").get<std::string>();
      g.excluded = gj.at("excluded").get<std::vector<std::string>>();
      g.low_support = gj.at("low_support").get<std::vector<std::string>>();
      g.diagnostic = gj.at("diagnostic").get<std::string>();
      for (const auto& sj : gj.at("subgroups")) {
        SubgroupStats s;
        s.label = sj.at("label").get<std::string>();
        s.key.groups = g.groups;
        s.key.categories = sj.at("categories").get<std::vector<int>>();
        s.support = sj.at("support").get<std::size_t>();
        s.mean_accuracy = read_optional(sj.at("mean_accuracy"));
        s.recall = recall_from_json(sj.at("per_class_recall"), r.class_names);
        g.sums.push_back(read_optional(sj.at("recall_sum")));
        g.subgroups.push_back(std::move(s));
      }
      r.groupings.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed report JSON: " + std::string(e.what()));
  }
  return r;
}

std::string report_to_markdown(const FairnessReport& report, const std::string& title) {
  std::ostringstream os;
  os << "# " << title << "\n\n";
  os << "Samples: " << report.num_records << "  \n";
  os << "Overall accuracy: " << percent(report.overall_accuracy) << "  \n";
  os << "Mean class-wise accuracy: " << percent(report.mean_class_accuracy) << "\n\n";

  os << "## Class-wise accuracy\n\n| Class | Accuracy |\n|---|---|\n";
  os << "| Mean | " << percent(report.mean_class_accuracy) << " |\n";
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    auto it = report.per_class_recall.find(static_cast<int>(c));
    std::optional<double> v;
    if (it != report.per_class_recall.end()) v = it->second;
    os << "| " << report.class_names[c] << " | " << percent(v) << " |\n";
  }

  os << "\n## Mean class-wise accuracy by subgroup\n\n| Subgroup | Support | Accuracy |\n|---|---|---|\n";
  for (const auto& g : report.groupings) {
    os << "| **" << g.display_name << "** | | |\n";
    for (const auto& s : g.subgroups) {
      os << "| " << s.label << " | " << s.support << " | " << percent(s.mean_accuracy) << " |\n";
    }
  }

  os << "\n## Fairness\n\n| Grouping | Fairness | Dominant subgroup | Notes |\n|---|---|---|---|\n";
  for (const auto& g : report.groupings) {
    std::string notes = g.diagnostic;
    if (!g.excluded.empty()) {
      notes += notes.empty() ? "" : "; ";
      notes += "excluded:";
      for (const auto& e : g.excluded) notes += " " + e;
    }
    if (!g.low_support.empty()) {
      notes += notes.empty() ? "" : "; ";
      notes += "low support:";
      for (const auto& e : g.low_support) notes += " " + e;
    }
    os << "| " << g.display_name << " | " << fixed3(g.fairness) << " | " << g.dominant.value_or("-") << " | "
       << notes << " |\n";
  }
  return os.str();
}

}  // namespace fairexpr
