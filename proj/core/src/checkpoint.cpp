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

#include "fairexpr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "fairexpr/errors.hpp"
#include "json_util.hpp"

namespace fairexpr {
namespace detail {

Json schema_to_json(const AttributeSchema& schema) {
  Json groups = Json::array();
  for (const auto& g : schema.groups()) groups.push_back({{"name", g.name}, {"categories", g.categories}});
  return groups;
}

AttributeSchema schema_from_json(const Json& j) {
  std::vector<AttributeGroup> groups;
  for (const auto& g : j) {
    groups.push_back({g.at("name").get<std::string>(), g.at("categories").get<std::vector<std::string>>()});
  }
  return AttributeSchema(std::move(groups));
}

Json policy_to_json(const GradientPolicy& policy) {
  Json out = Json::object();
  for (const auto& [loss, parts] : policy.table()) {
    Json list = Json::array();
    for (auto p : parts) list.push_back(std::string(partition_name(p)));
    out[loss] = list;
  }
  return out;
}

GradientPolicy policy_from_json(const Json& j) {
  GradientPolicy::Table table;
  for (const auto& [loss, list] : j.items()) {
    auto& parts = table[loss];
    for (const auto& name : list) {
      auto p = parse_partition(name.get<std::string>());
      if (!p) throw ConfigError("unknown parameter partition '" + name.get<std::string>() + "'");
      parts.insert(*p);
    }
  }
  return GradientPolicy(std::move(table));
}

}  // namespace detail

namespace {

constexpr char kMagic[4] = {'F', 'X', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("checkpoint blob truncated");
  return v;
}

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  return std::filesystem::path(stem.string() + ext);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, const ModelBundle& bundle, const CheckpointMeta& meta) {
  using detail::Json;
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  {
    std::ofstream os(with_ext(stem, ".bin"), std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + with_ext(stem, ".bin").string());
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(bundle.params().size()));
    for (const auto& p : bundle.params()) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
      os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
      for (auto d : p.value.shape()) put<std::uint64_t>(os, d);
      os.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
  }
  const auto& spec = bundle.spec();
  Json j;
  j["format"] = "fairexpr-checkpoint";
  j["version"] = kVersion;
  j["backbone"] = {{"variant", std::string(to_string(spec.backbone.variant))},
                   {"input_side", spec.backbone.input_side},
                   {"feature_dim", spec.backbone.feature_dim},
                   {"tiny_channels", spec.backbone.tiny_channels}};
  j["head"] = {{"kind", std::string(to_string(spec.head.kind))},
               {"num_classes", spec.head.num_classes},
               {"alpha", spec.head.alpha},
               {"schema", detail::schema_to_json(spec.head.schema)}};
  j["gradient_policy"] = detail::policy_to_json(bundle.policy());
  j["training"] = {{"epoch", meta.epoch}, {"step", meta.step}, {"monitor", meta.monitor}, {"rng_state", meta.rng_state}};
  Json names = Json::array();
  for (const auto& p : bundle.params()) names.push_back(p.name);
  j["parameters"] = names;
  std::ofstream js(with_ext(stem, ".json"), std::ios::binary);
  if (!js) throw IoError("cannot write checkpoint sidecar " + with_ext(stem, ".json").string());
  js << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  using detail::Json;
  std::ifstream js(with_ext(stem, ".json"), std::ios::binary);
  if (!js) throw IoError("checkpoint sidecar not found: " + with_ext(stem, ".json").string());
  Json j;
  try {
    j = Json::parse(js);
  } catch (const std::exception& e) {
    throw IoError("checkpoint sidecar unreadable: " + std::string(e.what()));
  }
  ModelSpec spec;
  Checkpoint ck;
  try {
    const auto& b = j.at("backbone");
    spec.backbone.variant = parse_backbone_variant(b.at("variant").get<std::string>());
    spec.backbone.input_side = b.at("input_side").get<int>();
    spec.backbone.feature_dim = b.at("feature_dim").get<int>();
    spec.backbone.tiny_channels = b.at("tiny_channels").get<std::vector<int>>();
    const auto& h = j.at("head");
    spec.head.kind = parse_head_kind(h.at("kind").get<std::string>());
    spec.head.num_classes = h.at("num_classes").get<int>();
    spec.head.alpha = h.at("alpha").get<double>();
    spec.head.schema = detail::schema_from_json(h.at("schema"));
    spec.policy = detail::policy_from_json(j.at("gradient_policy"));
    const auto& t = j.at("training");
    ck.meta.epoch = t.at("epoch").get<int>();
    ck.meta.step = t.at("step").get<std::int64_t>();
    ck.meta.monitor = t.at("monitor").get<double>();
    ck.meta.rng_state = t.at("rng_state").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint sidecar malformed: " + std::string(e.what()));
  }
  ck.bundle = ModelBundle(spec, 0);

  std::ifstream is(with_ext(stem, ".bin"), std::ios::binary);
  if (!is) throw IoError("checkpoint blob not found: " + with_ext(stem, ".bin").string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw IoError("checkpoint blob: bad magic");
  if (get<std::uint32_t>(is) != kVersion) throw IoError("checkpoint blob: unsupported version");
  const auto count = get<std::uint32_t>(is);
  auto& params = ck.bundle.params();
  if (count != params.size()) throw IoError("checkpoint blob: parameter count does not match model");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get<std::uint32_t>(is), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) throw IoError("checkpoint blob truncated");
    Shape shape(get<std::uint32_t>(is));
    for (auto& d : shape) d = get<std::uint64_t>(is);
    auto& p = params[i];
    if (p.name != name || p.value.shape() != shape) {
      throw IoError("checkpoint blob: parameter '" + name + "' does not match model layout");
    }
    if (!is.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)))) {
      throw IoError("checkpoint blob truncated");
    }
  }
  return ck;
}

}  // namespace fairexpr
