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

#ifndef FAIREXPR_CHECKPOINT_HPP_
#define FAIREXPR_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "fairexpr/model.hpp"

namespace fairexpr {

struct CheckpointMeta {
  int epoch = 0;
  std::int64_t step = 0;
  double monitor = 0.0;
  /// Serialized Rng state at save time.
  std::string rng_state;
};

struct Checkpoint {
  ModelBundle bundle;
  CheckpointMeta meta;
};

/// Writes `<stem>.bin` (parameter blob) and `<stem>.json` (model spec,
/// schema, alpha, gradient policy, training step and RNG state).
void save_checkpoint(const std::filesystem::path& stem, const ModelBundle& bundle, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace fairexpr

#endif  // FAIREXPR_CHECKPOINT_HPP_
