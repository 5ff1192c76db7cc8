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

#ifndef FAIREXPR_CSV_HPP_
#define FAIREXPR_CSV_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace fairexpr::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and `""`.
std::vector<std::string> parse_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Shortest decimal form that round-trips the double exactly.
std::string format_double(double value);

struct Line {
  /// 1-based line number in the file.
  std::size_t number = 0;
  std::string text;
};

/// Reads all non-empty lines (CRLF tolerated, UTF-8 BOM stripped).
std::vector<Line> read_lines(const std::string& path);

}  // namespace fairexpr::csv

#endif  // FAIREXPR_CSV_HPP_
