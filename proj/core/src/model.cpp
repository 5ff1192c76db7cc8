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

#include "fairexpr/model.hpp"

#include <algorithm>

#include "fairexpr/errors.hpp"

namespace fairexpr {

std::string_view to_string(BackboneVariant v) noexcept {
  return v == BackboneVariant::resnet18 ? "resnet18" : "tiny";
}

std::string_view to_string(HeadKind k) noexcept {
  switch (k) {
    case HeadKind::baseline: return "baseline";
    case HeadKind::attribute_aware: return "attribute_aware";
    case HeadKind::disentangled: return "disentangled";
  }
  return "unknown";
}

BackboneVariant parse_backbone_variant(std::string_view text) {
  if (text == "resnet18") return BackboneVariant::resnet18;
  if (text == "tiny") return BackboneVariant::tiny;
  throw ConfigError("unknown backbone variant '" + std::string(text) + "' (expected resnet18 or tiny)");
}

HeadKind parse_head_kind(std::string_view text) {
  for (auto k : {HeadKind::baseline, HeadKind::attribute_aware, HeadKind::disentangled}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown approach '" + std::string(text) +
                    "' (expected baseline, attribute_aware or disentangled)");
}

// ---------------------------------------------------------------------------

Backbone::Backbone(const BackboneSpec& spec, ParameterStore& store, Rng& rng) : spec_(spec) {
  if (spec.input_side <= 0 || spec.feature_dim <= 0) throw ValidationError("backbone: sizes must be positive");
  nn::InitContext trunk{store, rng, Partition::trunk, "trunk"};
  std::vector<nn::LayerPtr> layers;
  int pooled_features = 0;
  if (spec.variant == BackboneVariant::tiny) {
    if (spec.tiny_channels.size() != 3) throw ValidationError("backbone: tiny needs exactly three stage widths");
    int in = 3;
    int side = spec.input_side;
    for (std::size_t i = 0; i < spec.tiny_channels.size(); ++i) {
      const int out = spec.tiny_channels[i];
      layers.push_back(nn::conv2d(trunk, "conv" + std::to_string(i + 1), in, out, 3, 1, 1, true));
      layers.push_back(nn::relu());
      layers.push_back(nn::max_pool2d(2, 2));
      side = nn::window_output(side, 2, 2, 0);
      in = out;
    }
    if (side <= 0) throw ValidationError("backbone: input side too small for tiny variant");
    layers.push_back(nn::flatten());
    pooled_features = in * side * side;
  } else {
    layers.push_back(nn::conv2d(trunk, "conv1", 3, 64, 7, 2, 3, false));
    layers.push_back(nn::batch_norm2d(trunk, "bn1", 64));
    layers.push_back(nn::relu());
    layers.push_back(nn::max_pool2d(3, 2, 1));
    const int widths[] = {64, 128, 256, 512};
    int in = 64;
    for (int stage = 0; stage < 4; ++stage) {
      const int out = widths[stage];
      const std::string name = "layer" + std::to_string(stage + 1);
      layers.push_back(nn::basic_block(trunk, name + ".0", in, out, stage == 0 ? 1 : 2));
      layers.push_back(nn::basic_block(trunk, name + ".1", out, out, 1));
      in = out;
    }
    layers.push_back(nn::global_avg_pool());
    pooled_features = 512;
  }
  trunk_ = nn::sequential(std::move(layers));
  nn::InitContext fc{store, rng, Partition::final_fc, ""};
  final_fc_ = nn::linear(fc, "final_fc", pooled_features, spec.feature_dim);
}

void Backbone::check_input(const Tensor& images) const {
  const auto side = static_cast<std::size_t>(spec_.input_side);
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != side || images.dim(3) != side) {
    throw ValidationError("backbone: expected image batch [Bx3x" + std::to_string(side) + "x" +
                          std::to_string(side) + "], got " + to_string(images.shape()));
  }
}

Tensor Backbone::forward(ParameterStore& params, const Tensor& images, Cache& cache) const {
  check_input(images);
  Tensor h = trunk_->forward(params, images, cache.trunk);
  return final_fc_->forward(params, h, cache.final_fc);
}

Tensor Backbone::infer(const ParameterStore& params, const Tensor& images) const {
  check_input(images);
  return final_fc_->infer(params, trunk_->infer(params, images));
}

void Backbone::backward(const ParameterStore& params, const Cache& cache, const Tensor& d_fc, const Tensor& d_trunk,
                        GradientSet& grads) const {
  const bool shared = &d_fc == &d_trunk;
  if (!d_trunk.empty()) {
    GradientSet scratch;
    if (!shared) scratch = GradientSet(params);
    Tensor dh = final_fc_->backward(params, cache.final_fc, d_trunk, shared ? grads : scratch, true);
    trunk_->backward(params, cache.trunk, dh, grads, false);
  }
  if (!shared && !d_fc.empty()) final_fc_->backward(params, cache.final_fc, d_fc, grads, false);
}

// ---------------------------------------------------------------------------

GradientPolicy GradientPolicy::defaults(HeadKind kind) {
  using P = Partition;
  switch (kind) {
    case HeadKind::baseline:
      return GradientPolicy({{"exp", {P::trunk, P::final_fc, P::primary_head}}});
    case HeadKind::attribute_aware:
      return GradientPolicy({{"exp", {P::trunk, P::final_fc, P::primary_head, P::attribute_projection}}});
    case HeadKind::disentangled:
      return GradientPolicy({
          {"exp", {P::trunk, P::final_fc, P::primary_head}},
          {"s", {P::final_fc, P::attribute_heads}},
          {"conf", {P::trunk, P::final_fc}},
      });
  }
  return {};
}

const std::set<Partition>& GradientPolicy::routes(std::string_view loss) const {
  auto it = table_.find(loss);
  if (it == table_.end()) throw ConfigError("gradient policy has no route for loss '" + std::string(loss) + "'");
  return it->second;
}

// ---------------------------------------------------------------------------

ModelBundle::ModelBundle(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  const auto& head = spec.head;
  if (head.num_classes < 2) throw ValidationError("model: need at least two expression classes");
  if (head.kind != HeadKind::baseline && head.schema.empty()) {
    throw ValidationError(std::string("model: ") + std::string(to_string(head.kind)) +
                          " head requires an attribute schema");
  }
  if (!(head.alpha >= 0.0)) throw ValidationError("model: alpha must be >= 0");

  Rng backbone_rng = Rng::derive(seed, 1);
  backbone_ = Backbone(spec.backbone, params_, backbone_rng);
  const int d = backbone_.feature_dim();

  Rng primary_rng = Rng::derive(seed, 2);
  nn::InitContext primary{params_, primary_rng, Partition::primary_head, ""};
  primary_head_ = nn::linear(primary, "primary_head", d, head.num_classes);

  if (head.kind == HeadKind::attribute_aware) {
    Rng rng = Rng::derive(seed, 3);
    nn::InitContext ctx{params_, rng, Partition::attribute_projection, ""};
    projection_ = nn::linear(ctx, "attribute_projection", static_cast<int>(head.schema.encoding_width()), d);
  }
  if (head.kind == HeadKind::disentangled) {
    Rng rng = Rng::derive(seed, 4);
    nn::InitContext ctx{params_, rng, Partition::attribute_heads, "attribute_heads"};
    for (const auto& g : head.schema.groups()) {
      attribute_heads_.push_back(nn::linear(ctx, g.name, d, static_cast<int>(g.size())));
    }
  }
  policy_ = spec.policy.value_or(GradientPolicy::defaults(head.kind));
  spec_.policy = policy_;
}

std::vector<std::size_t> ModelBundle::partition_indices(Partition p) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].trainable && params_[i].partition == p) out.push_back(i);
  }
  return out;
}

void zero_partition(ModelBundle& bundle, Partition p) {
  for (auto& param : bundle.params()) {
    if (param.partition == p && param.trainable) param.value.fill(0.0);
  }
}

void transplant(const ModelBundle& from, ModelBundle& to, std::span<const Partition> partitions) {
  for (auto& param : to.params()) {
    if (std::find(partitions.begin(), partitions.end(), param.partition) == partitions.end()) continue;
    auto i = from.params().find(param.name);
    if (!i) throw ValidationError("transplant: source lacks parameter '" + param.name + "'");
    const auto& src = from.params()[*i].value;
    if (src.shape() != param.value.shape()) throw ValidationError("transplant: shape mismatch for " + param.name);
    param.value = src;
  }
}

Tensor images_to_batch(std::span<const Image> images) {
  if (images.empty()) throw ValidationError("images_to_batch: empty batch");
  const auto h = static_cast<std::size_t>(images[0].height);
  const auto w = static_cast<std::size_t>(images[0].width);
  Tensor batch({images.size(), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    if (img.channels != 3 || static_cast<std::size_t>(img.height) != h || static_cast<std::size_t>(img.width) != w) {
      throw ValidationError("images_to_batch: inconsistent image shapes");
    }
    double* dst = batch.data() + n * 3 * h * w;
    for (std::size_t p = 0; p < h * w; ++p) {
      for (std::size_t c = 0; c < 3; ++c) dst[c * h * w + p] = img.pixels[p * 3 + c];
    }
  }
  return batch;
}

Tensor attributes_to_batch(std::span<const std::vector<int>> attributes, const AttributeSchema& schema) {
  const std::size_t width = schema.encoding_width();
  Tensor out({attributes.size(), width});
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    const auto v = encode_attributes(attributes[i], schema);
    std::copy(v.begin(), v.end(), out.data() + i * width);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void require_kind(const ModelBundle& bundle, HeadKind kind, const char* who) {
  if (bundle.kind() != kind) {
    throw ValidationError(std::string(who) + ": bundle head is " + std::string(to_string(bundle.kind())));
  }
}

void check_attribute_batch(const ModelBundle& bundle, const Tensor& images, const Tensor& attributes) {
  const auto width = bundle.head().schema.encoding_width();
  if (attributes.rank() != 2 || attributes.dim(1) != width || attributes.dim(0) != images.dim(0)) {
    throw ValidationError("attribute vectors: expected [" + std::to_string(images.dim(0)) + "x" +
                          std::to_string(width) + "], got " + to_string(attributes.shape()));
  }
}

}  // namespace

ModelOutput forward_baseline(const ModelBundle& bundle, const Tensor& images) {
  require_kind(bundle, HeadKind::baseline, "forward_baseline");
  ModelOutput out;
  out.features = bundle.backbone().infer(bundle.params(), images);
  out.expression_logits = bundle.primary_head().infer(bundle.params(), out.features);
  out.expression_probs = nn::softmax(out.expression_logits);
  return out;
}

ModelOutput forward_attribute_aware(const ModelBundle& bundle, const Tensor& images, const Tensor& attributes) {
  require_kind(bundle, HeadKind::attribute_aware, "forward_attribute_aware");
  check_attribute_batch(bundle, images, attributes);
  ModelOutput out;
  out.features = bundle.backbone().infer(bundle.params(), images);
  Tensor fused = bundle.attribute_projection()->infer(bundle.params(), attributes);
  fused += out.features;
  out.expression_logits = bundle.primary_head().infer(bundle.params(), fused);
  out.expression_probs = nn::softmax(out.expression_logits);
  return out;
}

ModelOutput forward_disentangled(const ModelBundle& bundle, const Tensor& images) {
  require_kind(bundle, HeadKind::disentangled, "forward_disentangled");
  ModelOutput out;
  out.features = bundle.backbone().infer(bundle.params(), images);
  out.expression_logits = bundle.primary_head().infer(bundle.params(), out.features);
  out.expression_probs = nn::softmax(out.expression_logits);
  for (const auto& head : bundle.attribute_heads()) {
    out.attribute_logits.push_back(head->infer(bundle.params(), out.features));
    out.attribute_probs.push_back(nn::softmax(out.attribute_logits.back()));
  }
  return out;
}

ModelOutput predict(const ModelBundle& bundle, const Tensor& images, const Tensor* attributes) {
  switch (bundle.kind()) {
    case HeadKind::baseline: return forward_baseline(bundle, images);
    case HeadKind::attribute_aware:
      if (!attributes) throw ValidationError("predict: attribute_aware head needs attribute vectors");
      return forward_attribute_aware(bundle, images, *attributes);
    case HeadKind::disentangled: return forward_disentangled(bundle, images);
  }
  return {};
}

// ---------------------------------------------------------------------------

TrainingPass::TrainingPass(ModelBundle& bundle, const Tensor& images, const Tensor* attributes) : bundle_(bundle) {
  auto& params = bundle.params();
  out_.features = bundle.backbone().forward(params, images, backbone_cache_);
  Tensor head_input = out_.features;
  if (bundle.kind() == HeadKind::attribute_aware) {
    if (!attributes) throw ValidationError("training pass: attribute_aware head needs attribute vectors");
    check_attribute_batch(bundle, images, *attributes);
    head_input += bundle.attribute_projection()->forward(params, *attributes, projection_cache_);
  }
  out_.expression_logits = bundle.primary_head().forward(params, head_input, primary_cache_);
  out_.expression_probs = nn::softmax(out_.expression_logits);
  attribute_caches_.resize(bundle.attribute_heads().size());
  for (std::size_t j = 0; j < bundle.attribute_heads().size(); ++j) {
    out_.attribute_logits.push_back(bundle.attribute_heads()[j]->forward(params, out_.features, attribute_caches_[j]));
    out_.attribute_probs.push_back(nn::softmax(out_.attribute_logits.back()));
  }
}

Tensor TrainingPass::head_backward(const HeadGradients& upstream, GradientSet* into) const {
  const auto& params = bundle_.params();
  GradientSet scratch;
  if (!into) {
    scratch = GradientSet(params);
    into = &scratch;
  }
  Tensor dphi(out_.features.shape());
  if (!upstream.expression.empty()) {
    Tensor dz = bundle_.primary_head().backward(params, primary_cache_, upstream.expression, *into, true);
    if (bundle_.kind() == HeadKind::attribute_aware) {
      bundle_.attribute_projection()->backward(params, projection_cache_, dz, *into, false);
    }
    dphi += dz;
  }
  if (!upstream.attributes.empty()) {
    if (upstream.attributes.size() != bundle_.attribute_heads().size()) {
      throw ValidationError("training pass: attribute gradient count does not match heads");
    }
    for (std::size_t j = 0; j < upstream.attributes.size(); ++j) {
      if (upstream.attributes[j].empty()) continue;
      dphi += bundle_.attribute_heads()[j]->backward(params, attribute_caches_[j], upstream.attributes[j], *into, true);
    }
  }
  return dphi;
}

GradientSet TrainingPass::gradient(const HeadGradients& upstream) const {
  GradientSet grads(bundle_.params());
  const Tensor dphi = head_backward(upstream, &grads);
  bundle_.backbone().backward(bundle_.params(), backbone_cache_, dphi, dphi, grads);
  return grads;
}

GradientSet TrainingPass::routed_gradient(const std::vector<WeightedLoss>& losses) const {
  const auto& params = bundle_.params();
  const auto& policy = bundle_.policy();
  GradientSet grads(params);
  Tensor up_fc, up_trunk;
  bool same_signature = true;
  const auto accumulate = [](Tensor& dst, const Tensor& src, double w) {
    if (dst.empty()) dst = Tensor(src.shape());
    dst.add_scaled(src, w);
  };
  for (const auto& loss : losses) {
    GradientSet head_grads(params);
    const Tensor dphi = head_backward(loss.grad, &head_grads);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (head_grads.has(i) && params[i].trainable && policy.routes_to(loss.name, params[i].partition)) {
        grads.at(i).add_scaled(head_grads.get(i), loss.weight);
      }
    }
    const bool to_fc = policy.routes_to(loss.name, Partition::final_fc);
    const bool to_trunk = policy.routes_to(loss.name, Partition::trunk);
    if (to_fc) accumulate(up_fc, dphi, loss.weight);
    if (to_trunk) accumulate(up_trunk, dphi, loss.weight);
    same_signature = same_signature && to_fc == to_trunk;
  }
  if (same_signature) {
    if (!up_fc.empty()) bundle_.backbone().backward(params, backbone_cache_, up_fc, up_fc, grads);
  } else {
    bundle_.backbone().backward(params, backbone_cache_, up_fc, up_trunk, grads);
  }
  return grads;
}

GradientSet route(const GradientSet& grads, const ModelBundle& bundle, std::string_view loss) {
  const auto& routes = bundle.policy().routes(loss);
  GradientSet out = grads;
  for (std::size_t i = 0; i < bundle.params().size(); ++i) {
    const auto& p = bundle.params()[i];
    if (!p.trainable || !routes.contains(p.partition)) out.clear(i);
  }
  return out;
}

}  // namespace fairexpr
