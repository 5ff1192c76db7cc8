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

#ifndef FAIREXPR_SRC_JSON_UTIL_HPP_
#define FAIREXPR_SRC_JSON_UTIL_HPP_

#include <json.hpp>

#include "fairexpr/model.hpp"
#include "fairexpr/schema.hpp"

namespace fairexpr::detail {

using Json = nlohmann::ordered_json;

Json schema_to_json(const AttributeSchema& schema);
AttributeSchema schema_from_json(const Json& j);
Json policy_to_json(const GradientPolicy& policy);
GradientPolicy policy_from_json(const Json& j);

}  // namespace fairexpr::detail

#endif  // FAIREXPR_SRC_JSON_UTIL_HPP_
