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

#include "fairexpr/schema.hpp"

#include <set>

#include "fairexpr/errors.hpp"

namespace fairexpr {

AttributeSchema::AttributeSchema(std::vector<AttributeGroup> groups) : groups_(std::move(groups)) {
  std::set<std::string> names;
  for (const auto& g : groups_) {
    if (g.name.empty()) throw ValidationError("schema: empty group name");
    if (!names.insert(g.name).second) throw ValidationError("schema: duplicate group '" + g.name + "'");
    if (g.categories.size() < 2) {
      throw ValidationError("schema: group '" + g.name + "' needs at least two categories");
    }
    std::set<std::string> cats(g.categories.begin(), g.categories.end());
    if (cats.size() != g.categories.size()) {
      throw ValidationError("schema: duplicate category in group '" + g.name + "'");
    }
  }
}

std::size_t AttributeSchema::encoding_width() const noexcept {
  std::size_t w = 0;
  for (const auto& g : groups_) w += g.size();
  return w;
}

std::size_t AttributeSchema::encoding_offset(std::size_t j) const {
  std::size_t offset = 0;
  for (std::size_t i = 0; i < j; ++i) offset += groups_.at(i).size();
  return offset;
}

std::optional<std::size_t> AttributeSchema::find(std::string_view group_name) const {
  for (std::size_t j = 0; j < groups_.size(); ++j) {
    if (groups_[j].name == group_name) return j;
  }
  return std::nullopt;
}

std::size_t AttributeSchema::require(std::string_view group_name) const {
  if (auto j = find(group_name)) return *j;
  throw ValidationError("schema: unknown attribute group '" + std::string(group_name) + "'");
}

std::optional<int> AttributeSchema::category_index(std::size_t group, std::string_view label) const {
  const auto& cats = groups_.at(group).categories;
  for (std::size_t k = 0; k < cats.size(); ++k) {
    if (cats[k] == label) return static_cast<int>(k);
  }
  return std::nullopt;
}

AttributeSchema AttributeSchema::raf_default() {
  return AttributeSchema({
      {"race", {"Caucasian", "African-American", "Asian"}},
      {"gender", {"Male", "Female"}},
      {"age", {"0-3", "4-19", "20-39", "40-69", "70+"}},
  });
}

AttributeSchema AttributeSchema::celeba_default() {
  return AttributeSchema({
      {"gender", {"Female", "Male"}},
      {"age", {"Old", "Young"}},
  });
}

ExpressionVocab raf_expression_vocab() {
  return {"Surprise", "Fear", "Disgust", "Happy", "Sad", "Anger", "Neutral"};
}

ExpressionVocab celeba_expression_vocab() { return {"NotSmiling", "Smiling"}; }

void validate_attributes(std::span<const int> attributes, const AttributeSchema& schema) {
  if (attributes.size() != schema.size()) {
    throw ValidationError("attributes: expected " + std::to_string(schema.size()) + " entries, got " +
                          std::to_string(attributes.size()));
  }
  for (std::size_t j = 0; j < attributes.size(); ++j) {
    const int a = attributes[j];
    if (a < 0 || static_cast<std::size_t>(a) >= schema.group(j).size()) {
      throw ValidationError("attributes: index " + std::to_string(a) + " out of range for group '" +
                            schema.group(j).name + "'");
    }
  }
}

std::vector<double> encode_attributes(std::span<const int> attributes, const AttributeSchema& schema) {
  validate_attributes(attributes, schema);
  std::vector<double> out(schema.encoding_width(), 0.0);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < attributes.size(); ++j) {
    out[offset + static_cast<std::size_t>(attributes[j])] = 1.0;
    offset += schema.group(j).size();
  }
  return out;
}

std::vector<double> encode_attributes(const Sample& sample, const AttributeSchema& schema) {
  return encode_attributes(sample.attributes, schema);
}

}  // namespace fairexpr
