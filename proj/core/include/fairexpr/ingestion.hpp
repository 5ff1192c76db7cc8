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

#ifndef FAIREXPR_INGESTION_HPP_
#define FAIREXPR_INGESTION_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fairexpr/schema.hpp"

namespace fairexpr {

struct ManifestOptions {
  /// Images are resized to side x side after decoding.
  int image_side = 100;
  /// Rows whose label in `group` equals the mapped label are dropped before
  /// label resolution.
  std::map<std::string, std::string> exclusions{{"gender", "Unsure"}};
};

/// Loads `id,path,expression,<groups...>[,split]`. Image paths are resolved
/// relative to the manifest directory. Output order is file order.
std::vector<Sample> load_manifest(const std::filesystem::path& path, const AttributeSchema& schema,
                                  const ExpressionVocab& vocab, const ManifestOptions& options = {});

struct ManifestRow {
  std::string id;
  std::string path;
  std::string expression;
  std::vector<std::string> attributes;
  std::string split;
};

void write_manifest(const std::filesystem::path& path, const AttributeSchema& schema,
                    const std::vector<ManifestRow>& rows);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

/// Partition depending only on (ids, fractions, seed). Samples are ranked by
/// a seeded hash of their id; the first floor(n * train) go to train, the
/// next floor(n * val) to val, the remainder to test. Each part keeps input
/// order.
DatasetSplit split_deterministic(std::vector<Sample> samples, const SplitFractions& fractions,
                                 std::uint64_t seed);

/// Groups samples by their manifest split tag ("train", "val", "test").
DatasetSplit split_by_tag(std::vector<Sample> samples);

}  // namespace fairexpr

#endif  // FAIREXPR_INGESTION_HPP_
