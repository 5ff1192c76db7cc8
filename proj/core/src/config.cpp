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

#include "fairexpr/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "fairexpr/csv.hpp"
#include "fairexpr/errors.hpp"

namespace fairexpr {
namespace {

namespace fs = std::filesystem;

std::string join_path(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void require_map(const YAML::Node& n, const std::string& path) {
  if (!n.IsMap()) throw ConfigError("expected a mapping", path.empty() ? "<root>" : path);
}

void check_keys(const YAML::Node& n, const std::string& path, const std::set<std::string>& allowed) {
  require_map(n, path);
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) throw ConfigError("unknown key", join_path(path, key));
  }
}

template <typename T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  if constexpr (std::is_integral_v<T>) return "an integer";
  if constexpr (std::is_floating_point_v<T>) return "a number";
  return "a string";
}

template <typename T>
T as(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) throw ConfigError(std::string("expected ") + type_name<T>(), path);
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string("expected ") + type_name<T>() + ", got '" + n.Scalar() + "'", path);
  }
}

template <typename T>
void read(const YAML::Node& parent, const std::string& path, const char* key, T& out) {
  if (const auto n = parent[key]) out = as<T>(n, join_path(path, key));
}

template <typename T>
std::vector<T> as_list(const YAML::Node& n, const std::string& path) {
  if (!n.IsSequence()) throw ConfigError("expected a list", path);
  std::vector<T> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(as<T>(n[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  return p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
}

AttributeSchema parse_schema(const YAML::Node& n, const std::string& path) {
  if (!n.IsSequence()) throw ConfigError("expected a list of groups", path);
  std::vector<AttributeGroup> groups;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto p = path + "[" + std::to_string(i) + "]";
    check_keys(n[i], p, {"name", "categories"});
    if (!n[i]["name"] || !n[i]["categories"]) throw ConfigError("group needs name and categories", p);
    groups.push_back({as<std::string>(n[i]["name"], p + ".name"),
                      as_list<std::string>(n[i]["categories"], p + ".categories")});
  }
  try {
    return AttributeSchema(std::move(groups));
  } catch (const ValidationError& e) {
    throw ConfigError(e.what(), path);
  }
}

template <typename T>
std::map<std::string, T> per_group(const YAML::Node& n, const std::string& path,
                                   const std::function<T(const YAML::Node&, const std::string&)>& parse) {
  require_map(n, path);
  std::map<std::string, T> out;
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    out[key] = parse(kv.second, join_path(path, key));
  }
  return out;
}

SynthConfig parse_synth(const YAML::Node& n, const std::string& path, const AttributeSchema& schema,
                        const ExpressionVocab& vocab, std::uint64_t seed) {
  check_keys(n, path,
             {"output_dir", "n_samples", "image_side", "seed", "bias", "marginals", "link", "noise_std", "amplitude",
              "clarity_min", "cue_strength", "cue_jitter", "id_prefix"});
  SynthConfig sc;
  sc.schema = schema;
  sc.vocab = vocab;
  sc.seed = seed;
  read(n, path, "n_samples", sc.n_samples);
  read(n, path, "image_side", sc.image_side);
  read(n, path, "seed", sc.seed);
  read(n, path, "noise_std", sc.noise_std);
  read(n, path, "amplitude", sc.amplitude);
  read(n, path, "clarity_min", sc.clarity_min);
  read(n, path, "cue_strength", sc.cue_strength);
  read(n, path, "cue_jitter", sc.cue_jitter);
  read(n, path, "id_prefix", sc.id_prefix);
  if (const auto b = n["bias"]) {
    sc.bias = per_group<double>(b, join_path(path, "bias"), [](const YAML::Node& v, const std::string& p) {
      const double rho = as<double>(v, p);
      if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("bias must be in [0, 1]", p);
      return rho;
    });
  }
  if (const auto m = n["marginals"]) {
    sc.marginals = per_group<std::vector<double>>(m, join_path(path, "marginals"), as_list<double>);
  }
  if (const auto l = n["link"]) sc.link = per_group<std::vector<int>>(l, join_path(path, "link"), as_list<int>);

  // Field-level checks first so errors carry the exact path.
  if (sc.n_samples < 1) throw ConfigError("must be at least 1", join_path(path, "n_samples"));
  if (sc.image_side < 16) throw ConfigError("must be at least 16", join_path(path, "image_side"));
  for (const auto& [group, rho] : sc.bias) {
    if (!schema.find(group)) throw ConfigError("unknown group", join_path(path, "bias." + group));
  }
  for (const auto& [group, probs] : sc.marginals) {
    const auto p = join_path(path, "marginals." + group);
    const auto j = schema.find(group);
    if (!j) throw ConfigError("unknown group", p);
    if (probs.size() != schema.group(*j).size()) {
      throw ConfigError("expected " + std::to_string(schema.group(*j).size()) + " probabilities, got " +
                            std::to_string(probs.size()),
                        p);
    }
    double sum = 0.0;
    for (double v : probs) {
      if (!(v >= 0.0)) throw ConfigError("probabilities must be non-negative", p);
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("probabilities must sum to 1", p);
  }
  for (const auto& [group, link] : sc.link) {
    const auto p = join_path(path, "link." + group);
    const auto j = schema.find(group);
    if (!j) throw ConfigError("unknown group", p);
    if (link.size() != vocab.size()) throw ConfigError("needs one category index per expression class", p);
    for (int c : link) {
      if (c < 0 || c >= static_cast<int>(schema.group(*j).size())) throw ConfigError("category index out of range", p);
    }
  }
  try {
    sc.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what(), path);
  }
  // Echo every default in the resolved form.
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& name = schema.group(j).name;
    sc.marginals[name] = sc.marginals_for(j);
    sc.link[name] = sc.link_for(j);
  }
  return sc;
}

// ---------------------------------------------------------------------------

std::string num(double v) { return csv::format_double(v); }

void emit_list(YAML::Emitter& out, const std::vector<double>& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << num(x);
  out << YAML::EndSeq;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.manifest.has_value() == dataset.synth.has_value()) {
    throw ConfigError("exactly one of 'manifest' and 'synth' must be given", "dataset");
  }
  if (vocab.size() < 2) throw ConfigError("need at least two expression classes", "expressions");
  train.validate();
  if (train.approach != HeadKind::baseline && schema.empty()) {
    throw ConfigError("approach '" + std::string(to_string(train.approach)) + "' needs a non-empty schema", "schema");
  }
  const int side = dataset.synth ? dataset.synth->image_side : dataset.loading.image_side;
  try {
    train.augment.validate(side);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what(), "augment");
  }
  if (model.feature_dim < 1) throw ConfigError("must be at least 1", "model.feature_dim");
  if (model.backbone == BackboneVariant::tiny && model.tiny_channels.size() != 3) {
    throw ConfigError("expected three channel widths", "model.tiny_channels");
  }
  for (int c : model.tiny_channels) {
    if (c < 1) throw ConfigError("channel widths must be positive", "model.tiny_channels");
  }
  if (model.backbone == BackboneVariant::resnet18 && model.feature_dim != 512) {
    throw ConfigError("resnet18 produces 512 features", "model.feature_dim");
  }
  for (const auto& joint : report.joint_groupings) {
    if (joint.size() < 2) throw ConfigError("joint grouping needs at least two groups", "report.joint_groupings");
    for (const auto& g : joint) {
      if (!schema.find(g)) throw ConfigError("unknown group '" + g + "'", "report.joint_groupings");
    }
  }
  if (gradient_policy) {
    for (const auto& loss : {"exp", "s", "conf"}) {
      if (train.approach == HeadKind::disentangled && !gradient_policy->has(loss)) {
        throw ConfigError("missing routing for '" + std::string(loss) + "'", "gradient_policy");
      }
    }
    if (!gradient_policy->has("exp")) throw ConfigError("missing routing for 'exp'", "gradient_policy");
  }
}

ModelSpec ExperimentConfig::model_spec() const {
  ModelSpec spec;
  spec.backbone.variant = model.backbone;
  spec.backbone.input_side = train.augment.crop_size;
  spec.backbone.feature_dim = model.feature_dim;
  spec.backbone.tiny_channels = model.tiny_channels;
  spec.head.kind = train.approach;
  spec.head.num_classes = static_cast<int>(vocab.size());
  spec.head.schema = schema;
  spec.head.alpha = train.alpha;
  spec.policy = gradient_policy;
  return spec;
}

fs::path ExperimentConfig::manifest_path() const {
  return dataset.manifest ? *dataset.manifest : dataset.synth_dir / "manifest.csv";
}

ExperimentConfig parse_config(const std::string& yaml_text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("YAML syntax error: " + e.msg + " at line " + std::to_string(e.mark.line + 1));
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  check_keys(root, "",
             {"experiment", "dataset", "schema", "expressions", "model", "approach", "alpha", "train", "augment",
              "gradient_policy", "report"});
  ExperimentConfig cfg;

  if (const auto e = root["experiment"]) {
    check_keys(e, "experiment", {"name", "seed", "output_dir"});
    read(e, "experiment", "name", cfg.name);
    read(e, "experiment", "seed", cfg.seed);
    if (const auto o = e["output_dir"]) cfg.output_dir = resolve(base_dir, as<std::string>(o, "experiment.output_dir"));
  }
  if (!root["experiment"] || !root["experiment"]["output_dir"]) cfg.output_dir = resolve(base_dir, "runs/" + cfg.name);
  cfg.train.seed = cfg.seed;

  if (const auto s = root["schema"]) cfg.schema = parse_schema(s, "schema");
  if (const auto v = root["expressions"]) cfg.vocab = as_list<std::string>(v, "expressions");
  {
    std::set<std::string> unique(cfg.vocab.begin(), cfg.vocab.end());
    if (unique.size() != cfg.vocab.size()) throw ConfigError("duplicate class name", "expressions");
  }

  const auto d = root["dataset"];
  if (!d) throw ConfigError("missing section", "dataset");
  check_keys(d, "dataset", {"manifest", "synth", "image_side", "exclusions", "split"});
  if (d["manifest"] && d["synth"]) throw ConfigError("exactly one of 'manifest' and 'synth' must be given", "dataset");
  if (!d["manifest"] && !d["synth"]) throw ConfigError("one of 'manifest' and 'synth' is required", "dataset");
  if (const auto m = d["manifest"]) cfg.dataset.manifest = resolve(base_dir, as<std::string>(m, "dataset.manifest"));
  read(d, "dataset", "image_side", cfg.dataset.loading.image_side);
  if (const auto ex = d["exclusions"]) {
    cfg.dataset.loading.exclusions = per_group<std::string>(ex, "dataset.exclusions", as<std::string>);
  }
  if (const auto sp = d["split"]) {
    check_keys(sp, "dataset.split", {"train", "val", "test"});
    read(sp, "dataset.split", "train", cfg.dataset.split.train);
    read(sp, "dataset.split", "val", cfg.dataset.split.val);
    read(sp, "dataset.split", "test", cfg.dataset.split.test);
    const auto& f = cfg.dataset.split;
    if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
      throw ConfigError("fractions must be non-negative and sum to 1", "dataset.split");
    }
  }
  if (const auto s = d["synth"]) {
    cfg.dataset.synth = parse_synth(s, "dataset.synth", cfg.schema, cfg.vocab, cfg.seed);
    cfg.dataset.synth_dir = s["output_dir"] ? resolve(base_dir, as<std::string>(s["output_dir"], "dataset.synth.output_dir"))
                                            : cfg.output_dir / "data";
    cfg.dataset.loading.image_side = cfg.dataset.synth->image_side;
  }

  if (const auto m = root["model"]) {
    check_keys(m, "model", {"backbone", "feature_dim", "tiny_channels"});
    if (const auto b = m["backbone"]) cfg.model.backbone = parse_backbone_variant(as<std::string>(b, "model.backbone"));
    if (cfg.model.backbone == BackboneVariant::resnet18) cfg.model.feature_dim = 512;
    read(m, "model", "feature_dim", cfg.model.feature_dim);
    if (const auto c = m["tiny_channels"]) cfg.model.tiny_channels = as_list<int>(c, "model.tiny_channels");
  }
  if (const auto a = root["approach"]) {
    try {
      cfg.train.approach = parse_head_kind(as<std::string>(a, "approach"));
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), "approach");
    }
  }
  read(root, "", "alpha", cfg.train.alpha);
  if (const auto t = root["train"]) {
    check_keys(t, "train",
               {"batch_size", "initial_lr", "lr_decay_factor", "lr_decay_every_epochs", "max_epochs",
                "early_stop_patience_epochs"});
    read(t, "train", "batch_size", cfg.train.batch_size);
    read(t, "train", "initial_lr", cfg.train.initial_lr);
    read(t, "train", "lr_decay_factor", cfg.train.lr_decay_factor);
    read(t, "train", "lr_decay_every_epochs", cfg.train.lr_decay_every_epochs);
    read(t, "train", "max_epochs", cfg.train.max_epochs);
    read(t, "train", "early_stop_patience_epochs", cfg.train.early_stop_patience_epochs);
  }
  if (const auto a = root["augment"]) {
    check_keys(a, "augment", {"enabled", "crop_size", "rotation_degrees", "mirror_probability", "blend_weight"});
    auto& ag = cfg.train.augment;
    read(a, "augment", "enabled", ag.enabled);
    read(a, "augment", "crop_size", ag.crop_size);
    read(a, "augment", "mirror_probability", ag.mirror_probability);
    read(a, "augment", "blend_weight", ag.blend_weight);
    if (const auto r = a["rotation_degrees"]) {
      const auto range = as_list<double>(r, "augment.rotation_degrees");
      if (range.size() != 2) throw ConfigError("expected [min, max]", "augment.rotation_degrees");
      ag.rotation_min_degrees = range[0];
      ag.rotation_max_degrees = range[1];
    }
  }
  if (const auto g = root["gradient_policy"]) {
    require_map(g, "gradient_policy");
    GradientPolicy::Table table;
    for (const auto& kv : g) {
      const auto loss = kv.first.as<std::string>();
      const auto p = join_path("gradient_policy", loss);
      if (loss != "exp" && loss != "s" && loss != "conf") throw ConfigError("unknown loss (expected exp, s or conf)", p);
      auto& parts = table[loss];
      for (const auto& name : as_list<std::string>(kv.second, p)) {
        const auto part = parse_partition(name);
        if (!part) throw ConfigError("unknown partition '" + name + "'", p);
        parts.insert(*part);
      }
    }
    cfg.gradient_policy = GradientPolicy(std::move(table));
  }
  if (const auto r = root["report"]) {
    check_keys(r, "report", {"joint_groupings", "min_support"});
    if (const auto j = r["joint_groupings"]) {
      if (!j.IsSequence()) throw ConfigError("expected a list of group-name lists", "report.joint_groupings");
      for (std::size_t i = 0; i < j.size(); ++i) {
        cfg.report.joint_groupings.push_back(
            as_list<std::string>(j[i], "report.joint_groupings[" + std::to_string(i) + "]"));
      }
    }
    read(r, "report", "min_support", cfg.report.min_support);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path());
}

std::string resolved_yaml(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << cfg.name;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "output_dir" << YAML::Value << cfg.output_dir.string();
  out << YAML::EndMap;

  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  if (cfg.dataset.manifest) out << YAML::Key << "manifest" << YAML::Value << cfg.dataset.manifest->string();
  if (cfg.dataset.synth) {
    const auto& s = *cfg.dataset.synth;
    out << YAML::Key << "synth" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "output_dir" << YAML::Value << cfg.dataset.synth_dir.string();
    out << YAML::Key << "n_samples" << YAML::Value << s.n_samples;
    out << YAML::Key << "image_side" << YAML::Value << s.image_side;
    out << YAML::Key << "seed" << YAML::Value << s.seed;
    out << YAML::Key << "bias" << YAML::Value << YAML::Flow << YAML::BeginMap;
    for (const auto& [g, rho] : s.bias) out << YAML::Key << g << YAML::Value << num(rho);
    out << YAML::EndMap;
    out << YAML::Key << "marginals" << YAML::Value << YAML::BeginMap;
    for (const auto& [g, probs] : s.marginals) {
      out << YAML::Key << g << YAML::Value;
      emit_list(out, probs);
    }
    out << YAML::EndMap;
    out << YAML::Key << "link" << YAML::Value << YAML::BeginMap;
    for (const auto& [g, link] : s.link) out << YAML::Key << g << YAML::Value << YAML::Flow << link;
    out << YAML::EndMap;
    out << YAML::Key << "noise_std" << YAML::Value << num(s.noise_std);
    out << YAML::Key << "amplitude" << YAML::Value << num(s.amplitude);
    out << YAML::Key << "clarity_min" << YAML::Value << num(s.clarity_min);
    out << YAML::Key << "cue_strength" << YAML::Value << num(s.cue_strength);
    out << YAML::Key << "cue_jitter" << YAML::Value << num(s.cue_jitter);
    out << YAML::Key << "id_prefix" << YAML::Value << s.id_prefix;
    out << YAML::EndMap;
  }
  out << YAML::Key << "image_side" << YAML::Value << cfg.dataset.loading.image_side;
  out << YAML::Key << "exclusions" << YAML::Value << YAML::Flow << YAML::BeginMap;
  for (const auto& [g, label] : cfg.dataset.loading.exclusions) out << YAML::Key << g << YAML::Value << label;
  out << YAML::EndMap;
  out << YAML::Key << "split" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "train" << YAML::Value << num(cfg.dataset.split.train);
  out << YAML::Key << "val" << YAML::Value << num(cfg.dataset.split.val);
  out << YAML::Key << "test" << YAML::Value << num(cfg.dataset.split.test);
  out << YAML::EndMap;
  out << YAML::EndMap;

  out << YAML::Key << "schema" << YAML::Value << YAML::BeginSeq;
  for (const auto& g : cfg.schema.groups()) {
    out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << g.name;
    out << YAML::Key << "categories" << YAML::Value << YAML::Flow << g.categories << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "expressions" << YAML::Value << YAML::Flow << cfg.vocab;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "backbone" << YAML::Value << std::string(to_string(cfg.model.backbone));
  out << YAML::Key << "feature_dim" << YAML::Value << cfg.model.feature_dim;
  out << YAML::Key << "tiny_channels" << YAML::Value << YAML::Flow << cfg.model.tiny_channels;
  out << YAML::EndMap;
  out << YAML::Key << "approach" << YAML::Value << std::string(to_string(cfg.train.approach));
  out << YAML::Key << "alpha" << YAML::Value << num(cfg.train.alpha);

  const auto& t = cfg.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "initial_lr" << YAML::Value << num(t.initial_lr);
  out << YAML::Key << "lr_decay_factor" << YAML::Value << num(t.lr_decay_factor);
  out << YAML::Key << "lr_decay_every_epochs" << YAML::Value << t.lr_decay_every_epochs;
  out << YAML::Key << "max_epochs" << YAML::Value << t.max_epochs;
  out << YAML::Key << "early_stop_patience_epochs" << YAML::Value << t.early_stop_patience_epochs;
  out << YAML::EndMap;

  const auto& a = t.augment;
  out << YAML::Key << "augment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << a.enabled;
  out << YAML::Key << "crop_size" << YAML::Value << a.crop_size;
  out << YAML::Key << "rotation_degrees" << YAML::Value;
  emit_list(out, {a.rotation_min_degrees, a.rotation_max_degrees});
  out << YAML::Key << "mirror_probability" << YAML::Value << num(a.mirror_probability);
  out << YAML::Key << "blend_weight" << YAML::Value << num(a.blend_weight);
  out << YAML::EndMap;

  const auto policy = cfg.gradient_policy.value_or(GradientPolicy::defaults(cfg.train.approach));
  out << YAML::Key << "gradient_policy" << YAML::Value << YAML::BeginMap;
  for (const auto& [loss, parts] : policy.table()) {
    out << YAML::Key << loss << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (auto p : parts) out << std::string(partition_name(p));
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;

  out << YAML::Key << "report" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "joint_groupings" << YAML::Value << YAML::BeginSeq;
  for (const auto& j : cfg.report.joint_groupings) out << YAML::Flow << j;
  out << YAML::EndSeq;
  out << YAML::Key << "min_support" << YAML::Value << cfg.report.min_support;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace fairexpr
