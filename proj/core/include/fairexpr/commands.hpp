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

#ifndef FAIREXPR_COMMANDS_HPP_
#define FAIREXPR_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fairexpr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  /// Run directories or prediction files, depending on the command.
  std::vector<std::filesystem::path> inputs;
  /// Split evaluated by `eval`.
  std::string split = "test";
  bool quiet = false;
};

/// Each command reports progress on `log`, errors on `err`, and returns an
/// exit code: 0 ok, 2 usage or configuration error, 3 runtime failure.
int cmd_synth(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_train(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_eval(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_report(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_compare(const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace fairexpr

#endif  // FAIREXPR_COMMANDS_HPP_
