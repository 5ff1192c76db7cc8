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

#ifndef FAIREXPR_NN_HPP_
#define FAIREXPR_NN_HPP_

#include <any>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fairexpr/random.hpp"
#include "fairexpr/tensor.hpp"

namespace fairexpr {

/// Parameter partitions used by gradient routing.
enum class Partition { trunk, final_fc, primary_head, attribute_heads, attribute_projection };

std::string_view partition_name(Partition p) noexcept;
std::optional<Partition> parse_partition(std::string_view name) noexcept;
inline constexpr Partition kAllPartitions[] = {Partition::trunk, Partition::final_fc, Partition::primary_head,
                                               Partition::attribute_heads, Partition::attribute_projection};

struct Parameter {
  std::string name;
  Partition partition = Partition::trunk;
  /// Buffers (batch-norm running statistics) are not trainable.
  bool trainable = true;
  Tensor value;
};

class ParameterStore {
 public:
  std::size_t add(std::string name, Partition partition, Tensor value, bool trainable = true);

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;

  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

  /// Total number of trainable scalars.
  std::size_t trainable_count() const noexcept;

 private:
  std::vector<Parameter> params_;
};

/// Gradients aligned with a ParameterStore. Entries are allocated on first
/// write; an empty entry means "no gradient" and optimizers skip it.
class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParameterStore& store);

  std::size_t size() const noexcept { return grads_.size(); }
  bool has(std::size_t i) const { return !grads_.at(i).empty(); }
  /// Zero-initialised on first access using the parameter's shape.
  Tensor& at(std::size_t i);
  const Tensor& get(std::size_t i) const { return grads_.at(i); }
  void clear(std::size_t i) { grads_.at(i) = Tensor(); }

  void add_scaled(const GradientSet& other, double scale);
  GradientSet& operator+=(const GradientSet& other) {
    add_scaled(other, 1.0);
    return *this;
  }
  /// True when no entry holds a nonzero value.
  bool all_zero() const noexcept;

 private:
  std::vector<Shape> shapes_;
  std::vector<Tensor> grads_;
};

namespace nn {

/// Differentiable building block. Layers are immutable descriptions holding
/// parameter indices; all mutable state lives in the ParameterStore and in
/// the per-call cache.
class Layer {
 public:
  virtual ~Layer() = default;

  /// Training-mode forward. Fills `cache` with what `backward` needs. May
  /// update non-trainable buffers (batch-norm running statistics).
  virtual Tensor forward(ParameterStore& params, const Tensor& x, std::any& cache) const = 0;
  /// Inference-mode forward; read-only.
  virtual Tensor infer(const ParameterStore& params, const Tensor& x) const = 0;
  /// Accumulates parameter gradients into `grads` and returns dL/dx (empty
  /// when `need_input_grad` is false).
  virtual Tensor backward(const ParameterStore& params, const std::any& cache, const Tensor& dy,
                          GradientSet& grads, bool need_input_grad) const = 0;
};

using LayerPtr = std::shared_ptr<const Layer>;

struct InitContext {
  ParameterStore& store;
  Rng& rng;
  Partition partition;
  std::string prefix;
};

/// 2-D convolution on NCHW input; weight shape {out, in, k, k}.
LayerPtr conv2d(InitContext& ctx, const std::string& name, int in_channels, int out_channels, int kernel,
                int stride, int padding, bool bias);
/// Affine map on {N, in}; weight {in, out}, bias {out}. `scaled_init` draws
/// weights uniformly in +-1/sqrt(in); otherwise weights and bias start at 0.
LayerPtr linear(InitContext& ctx, const std::string& name, int in_features, int out_features,
                bool scaled_init = true);
LayerPtr batch_norm2d(InitContext& ctx, const std::string& name, int channels);
LayerPtr relu();
LayerPtr max_pool2d(int kernel, int stride, int padding = 0);
LayerPtr global_avg_pool();
LayerPtr flatten();
LayerPtr sequential(std::vector<LayerPtr> layers);
/// ResNet basic block: relu(bn(conv(relu(bn(conv(x))))) + shortcut(x)).
LayerPtr basic_block(InitContext& ctx, const std::string& name, int in_channels, int out_channels, int stride);

/// Row-wise normalized exponentials of a {N, C} tensor.
Tensor softmax(const Tensor& logits);
/// dL/dlogits from probabilities and dL/dprobs.
Tensor softmax_backward(const Tensor& probs, const Tensor& dprobs);

/// Output spatial size of a convolution or pooling window.
int window_output(int input, int kernel, int stride, int padding);

}  // namespace nn
}  // namespace fairexpr

#endif  // FAIREXPR_NN_HPP_
