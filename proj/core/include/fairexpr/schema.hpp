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

#ifndef FAIREXPR_SCHEMA_HPP_
#define FAIREXPR_SCHEMA_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairexpr/image.hpp"

namespace fairexpr {

/// One sensitive attribute (race, gender, age, ...) and its categories.
struct AttributeGroup {
  std::string name;
  std::vector<std::string> categories;

  std::size_t size() const noexcept { return categories.size(); }
  friend bool operator==(const AttributeGroup&, const AttributeGroup&) = default;
};

/// Ordered list of attribute groups. Group names are unique, category names
/// are unique within a group and every group has at least two categories.
class AttributeSchema {
 public:
  AttributeSchema() = default;
  explicit AttributeSchema(std::vector<AttributeGroup> groups);

  const std::vector<AttributeGroup>& groups() const noexcept { return groups_; }
  const AttributeGroup& group(std::size_t j) const { return groups_.at(j); }
  /// Number of groups (m).
  std::size_t size() const noexcept { return groups_.size(); }
  bool empty() const noexcept { return groups_.empty(); }
  /// Sum of category counts: width of the concatenated one-hot encoding.
  std::size_t encoding_width() const noexcept;
  /// Offset of group j's block in the encoding.
  std::size_t encoding_offset(std::size_t j) const;

  std::optional<std::size_t> find(std::string_view group_name) const;
  std::size_t require(std::string_view group_name) const;
  std::optional<int> category_index(std::size_t group, std::string_view label) const;

  /// RAF-DB style: race(3), gender(2), age(5).
  static AttributeSchema raf_default();
  /// CelebA style: gender(2), age(2).
  static AttributeSchema celeba_default();

  friend bool operator==(const AttributeSchema&, const AttributeSchema&) = default;

 private:
  std::vector<AttributeGroup> groups_;
};

using ExpressionVocab = std::vector<std::string>;

/// Surprise, Fear, Disgust, Happy, Sad, Anger, Neutral.
ExpressionVocab raf_expression_vocab();
/// NotSmiling, Smiling.
ExpressionVocab celeba_expression_vocab();

struct Sample {
  std::string id;
  Image image;
  int expression = 0;
  /// One category index per schema group, in schema order.
  std::vector<int> attributes;
  /// train / val / test when the manifest carries a split column.
  std::string split;
};

/// Throws ValidationError unless `attributes` has one in-range index per group.
void validate_attributes(std::span<const int> attributes, const AttributeSchema& schema);

/// Concatenated one-hot blocks in schema group order.
std::vector<double> encode_attributes(std::span<const int> attributes, const AttributeSchema& schema);
std::vector<double> encode_attributes(const Sample& sample, const AttributeSchema& schema);

}  // namespace fairexpr

#endif  // FAIREXPR_SCHEMA_HPP_
