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

#include "fairexpr/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fairexpr/csv.hpp"
#include "fairexpr/errors.hpp"
#include "fairexpr/random.hpp"

namespace fairexpr {
namespace {

struct ManifestColumns {
  std::size_t id = 0;
  std::size_t path = 0;
  std::size_t expression = 0;
  std::vector<std::size_t> groups;
  std::optional<std::size_t> split;
};

std::size_t column_of(const std::vector<std::string>& header, const std::string& name,
                      const std::string& where) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError(where + ": header lacks column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

std::vector<Sample> load_manifest(const std::filesystem::path& path, const AttributeSchema& schema,
                                  const ExpressionVocab& vocab, const ManifestOptions& options) {
  if (!std::filesystem::exists(path)) throw IoError("manifest not found: " + path.string());
  const auto lines = csv::read_lines(path.string());
  if (lines.empty()) throw ValidationError(path.string() + ": missing header");

  const std::string where = path.string();
  const auto header = csv::parse_line(lines.front().text);
  ManifestColumns cols;
  cols.id = column_of(header, "id", where);
  cols.path = column_of(header, "path", where);
  cols.expression = column_of(header, "expression", where);
  for (const auto& g : schema.groups()) cols.groups.push_back(column_of(header, g.name, where));
  if (auto it = std::find(header.begin(), header.end(), "split"); it != header.end()) {
    cols.split = static_cast<std::size_t>(it - header.begin());
  }

  // Exclusions are keyed by group position so the check happens before label lookup.
  std::vector<std::pair<std::size_t, std::string>> exclusions;
  for (const auto& [group, label] : options.exclusions) {
    if (auto j = schema.find(group)) exclusions.emplace_back(cols.groups[*j], label);
  }

  const auto base = path.parent_path();
  std::vector<Sample> samples;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string row_ref = where + ":" + std::to_string(lines[i].number);
    const auto fields = csv::parse_line(lines[i].text);
    if (fields.size() != header.size()) {
      throw ValidationError(row_ref + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    const bool excluded = std::any_of(exclusions.begin(), exclusions.end(),
                                      [&](const auto& e) { return fields[e.first] == e.second; });
    if (excluded) continue;

    Sample s;
    s.id = fields[cols.id];
    const auto& label = fields[cols.expression];
    auto it = std::find(vocab.begin(), vocab.end(), label);
    if (it == vocab.end()) throw ValidationError(row_ref + ": unknown expression label '" + label + "'");
    s.expression = static_cast<int>(it - vocab.begin());
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const auto& cat = fields[cols.groups[j]];
      auto idx = schema.category_index(j, cat);
      if (!idx) {
        throw ValidationError(row_ref + ": unknown " + schema.group(j).name + " label '" + cat + "'");
      }
      s.attributes.push_back(*idx);
    }
    if (cols.split) s.split = fields[*cols.split];

    const auto image_path = base / fields[cols.path];
    try {
      s.image = resize_bilinear(read_image(image_path), options.image_side);
    } catch (const IoError&) {
      throw IoError(row_ref + ": unreadable image " + image_path.string());
    }
    for (auto& v : s.image.pixels) v = std::clamp(v, 0.0F, 1.0F);
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_manifest(const std::filesystem::path& path, const AttributeSchema& schema,
                    const std::vector<ManifestRow>& rows) {
  const bool with_split = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return !r.split.empty(); });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  std::vector<std::string> header{"id", "path", "expression"};
  for (const auto& g : schema.groups()) header.push_back(g.name);
  if (with_split) header.push_back("split");
  out << csv::join(header) << '\n';
  for (const auto& r : rows) {
    if (r.attributes.size() != schema.size()) throw ValidationError("manifest row '" + r.id + "': attribute count");
    std::vector<std::string> fields{r.id, r.path, r.expression};
    fields.insert(fields.end(), r.attributes.begin(), r.attributes.end());
    if (with_split) fields.push_back(r.split);
    out << csv::join(fields) << '\n';
  }
}

DatasetSplit split_deterministic(std::vector<Sample> samples, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0) throw ValidationError("split: fractions must be nonnegative");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw ValidationError("split: fractions must sum to 1");

  const std::size_t n = samples.size();
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = mix64(hash_text(samples[i].id) ^ mix64(seed));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keys[a] != keys[b] ? keys[a] < keys[b] : a < b;
  });

  // The epsilon absorbs representation error such as 100 * 0.8 = 79.999...
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.train + 1e-9));
  const auto n_val =
      std::min(n - n_train, static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.val + 1e-9)));
  std::vector<int> part(n, 2);
  for (std::size_t r = 0; r < n; ++r) {
    if (r < n_train) {
      part[order[r]] = 0;
    } else if (r < n_train + n_val) {
      part[order[r]] = 1;
    }
  }
  DatasetSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = part[i] == 0 ? out.train : part[i] == 1 ? out.val : out.test;
    dst.push_back(std::move(samples[i]));
  }
  return out;
}

DatasetSplit split_by_tag(std::vector<Sample> samples) {
  DatasetSplit out;
  for (auto& s : samples) {
    if (s.split == "train") {
      out.train.push_back(std::move(s));
    } else if (s.split == "val") {
      out.val.push_back(std::move(s));
    } else if (s.split == "test") {
      out.test.push_back(std::move(s));
    } else {
      throw ValidationError("sample '" + s.id + "': unknown split tag '" + s.split + "'");
    }
  }
  return out;
}

}  // namespace fairexpr
