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

#ifndef FAIREXPR_MODEL_HPP_
#define FAIREXPR_MODEL_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairexpr/image.hpp"
#include "fairexpr/nn.hpp"
#include "fairexpr/schema.hpp"

namespace fairexpr {

enum class BackboneVariant { resnet18, tiny };
enum class HeadKind { baseline, attribute_aware, disentangled };

std::string_view to_string(BackboneVariant v) noexcept;
std::string_view to_string(HeadKind k) noexcept;
BackboneVariant parse_backbone_variant(std::string_view text);
HeadKind parse_head_kind(std::string_view text);

struct BackboneSpec {
  BackboneVariant variant = BackboneVariant::tiny;
  /// Side of the square (cropped) input.
  int input_side = 96;
  /// Width D of the feature phi(x); 512 for resnet18.
  int feature_dim = 64;
  /// Conv widths of the three tiny stages.
  std::vector<int> tiny_channels{8, 16, 32};

  static BackboneSpec resnet18(int input_side = 96) { return {BackboneVariant::resnet18, input_side, 512, {}}; }
  static BackboneSpec tiny(int input_side, int feature_dim = 64) {
    return {BackboneVariant::tiny, input_side, feature_dim, {8, 16, 32}};
  }
  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

/// Feature extractor phi. `trunk` is everything before the final
/// fully-connected layer; `final_fc` maps the pooled trunk output to D.
///
/// tiny:     3 x [conv3x3 -> relu -> maxpool2], flatten, final_fc.
/// resnet18: conv7x7/2, bn, relu, maxpool3/2, 4 stages of 2 basic blocks
///           (64, 128, 256, 512), global average pool, final_fc (512 -> D).
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneSpec& spec, ParameterStore& store, Rng& rng);

  const BackboneSpec& spec() const noexcept { return spec_; }
  int feature_dim() const noexcept { return spec_.feature_dim; }

  struct Cache {
    std::any trunk;
    std::any final_fc;
  };

  Tensor forward(ParameterStore& params, const Tensor& images, Cache& cache) const;
  Tensor infer(const ParameterStore& params, const Tensor& images) const;
  /// `d_fc` drives the final_fc parameter gradients, `d_trunk` the trunk
  /// gradients (through final_fc). Either may be empty.
  void backward(const ParameterStore& params, const Cache& cache, const Tensor& d_fc, const Tensor& d_trunk,
                GradientSet& grads) const;

 private:
  void check_input(const Tensor& images) const;

  BackboneSpec spec_;
  nn::LayerPtr trunk_;
  nn::LayerPtr final_fc_;
};

/// Per-loss routing table: which parameter partitions each loss may update.
/// Loss names are "exp", "s" and "conf".
class GradientPolicy {
 public:
  using Table = std::map<std::string, std::set<Partition>, std::less<>>;

  GradientPolicy() = default;
  explicit GradientPolicy(Table table) : table_(std::move(table)) {}

  /// baseline:        exp -> {trunk, final_fc, primary_head}
  /// attribute_aware: exp -> {trunk, final_fc, primary_head, attribute_projection}
  /// disentangled:    exp -> {trunk, final_fc, primary_head}
  ///                  s    -> {final_fc, attribute_heads}
  ///                  conf -> {trunk, final_fc}
  static GradientPolicy defaults(HeadKind kind);

  /// Throws ConfigError for an unknown loss name.
  const std::set<Partition>& routes(std::string_view loss) const;
  bool routes_to(std::string_view loss, Partition p) const { return routes(loss).contains(p); }
  bool has(std::string_view loss) const { return table_.find(loss) != table_.end(); }
  const Table& table() const noexcept { return table_; }

  friend bool operator==(const GradientPolicy&, const GradientPolicy&) = default;

 private:
  Table table_;
};

struct HeadConfig {
  HeadKind kind = HeadKind::baseline;
  int num_classes = 7;
  AttributeSchema schema;
  double alpha = 1.0;
};

struct ModelSpec {
  BackboneSpec backbone;
  HeadConfig head;
  /// Defaults to GradientPolicy::defaults(head.kind).
  std::optional<GradientPolicy> policy;
};

/// Backbone plus one head configuration and its gradient policy. Copies are
/// deep with respect to parameters; layer descriptions are shared.
class ModelBundle {
 public:
  ModelBundle() = default;
  /// Trunk and final_fc draw from one seeded stream and each head partition
  /// from its own, so bundles of different kinds built with the same seed
  /// share phi and primary-head initialisation.
  ModelBundle(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  const HeadConfig& head() const noexcept { return spec_.head; }
  HeadKind kind() const noexcept { return spec_.head.kind; }
  const Backbone& backbone() const noexcept { return backbone_; }
  const GradientPolicy& policy() const noexcept { return policy_; }
  void set_policy(GradientPolicy policy) { policy_ = std::move(policy); }

  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

  const nn::Layer& primary_head() const { return *primary_head_; }
  const nn::Layer* attribute_projection() const { return projection_.get(); }
  const std::vector<nn::LayerPtr>& attribute_heads() const { return attribute_heads_; }

  /// Indices of trainable parameters in a partition.
  std::vector<std::size_t> partition_indices(Partition p) const;

 private:
  ModelSpec spec_;
  ParameterStore params_;
  Backbone backbone_;
  GradientPolicy policy_;
  nn::LayerPtr primary_head_;
  nn::LayerPtr projection_;
  std::vector<nn::LayerPtr> attribute_heads_;
};

/// Sets every parameter of a partition to zero.
void zero_partition(ModelBundle& bundle, Partition p);
/// Copies parameters of the given partitions by name; shapes must agree.
void transplant(const ModelBundle& from, ModelBundle& to, std::span<const Partition> partitions);

/// HWC float images -> NCHW double batch.
Tensor images_to_batch(std::span<const Image> images);
/// One-hot attribute encodings stacked into {B, sum |S_j|}.
Tensor attributes_to_batch(std::span<const std::vector<int>> attributes, const AttributeSchema& schema);

struct ModelOutput {
  /// phi(x), {B, D}.
  Tensor features;
  Tensor expression_logits;
  Tensor expression_probs;
  /// Disentangled only, one per schema group.
  std::vector<Tensor> attribute_logits;
  std::vector<Tensor> attribute_probs;
};

ModelOutput forward_baseline(const ModelBundle& bundle, const Tensor& images);
ModelOutput forward_attribute_aware(const ModelBundle& bundle, const Tensor& images, const Tensor& attributes);
ModelOutput forward_disentangled(const ModelBundle& bundle, const Tensor& images);
/// Dispatches on the head kind; `attributes` is required for attribute_aware.
ModelOutput predict(const ModelBundle& bundle, const Tensor& images, const Tensor* attributes = nullptr);

/// dL/dlogits for each head a loss touches. Empty tensors mean "not involved".
struct HeadGradients {
  Tensor expression;
  std::vector<Tensor> attributes;
};

struct WeightedLoss {
  std::string name;
  double weight = 1.0;
  HeadGradients grad;
};

/// Training-mode forward pass that retains activations for backward.
/// Parameters must not change while the pass is alive.
class TrainingPass {
 public:
  TrainingPass(ModelBundle& bundle, const Tensor& images, const Tensor* attributes = nullptr);

  const ModelOutput& output() const noexcept { return out_; }

  /// Unrouted gradient of one loss with respect to every trainable parameter.
  GradientSet gradient(const HeadGradients& upstream) const;
  /// Sum over losses of weight * gradient, each restricted to the partitions
  /// the bundle's policy routes it to. One backbone sweep per distinct
  /// routing signature.
  GradientSet routed_gradient(const std::vector<WeightedLoss>& losses) const;

 private:
  /// Accumulates head parameter gradients (when `into` is non-null) and
  /// returns dL/dphi.
  Tensor head_backward(const HeadGradients& upstream, GradientSet* into) const;

  ModelBundle& bundle_;
  Backbone::Cache backbone_cache_;
  std::any primary_cache_;
  std::any projection_cache_;
  std::vector<std::any> attribute_caches_;
  ModelOutput out_;
};

/// Copy of `grads` keeping only entries routed for `loss` by the bundle policy.
GradientSet route(const GradientSet& grads, const ModelBundle& bundle, std::string_view loss);

}  // namespace fairexpr

#endif  // FAIREXPR_MODEL_HPP_
