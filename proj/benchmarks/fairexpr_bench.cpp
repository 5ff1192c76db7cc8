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


#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "fairexpr/augmentation.hpp"
#include "fairexpr/fairness.hpp"
#include "fairexpr/losses.hpp"
#include "fairexpr/model.hpp"
#include "fairexpr/optimizer.hpp"
#include "fairness_oracle.hpp"

using namespace fairexpr;

namespace {

ModelSpec bench_spec(HeadKind kind, bool resnet, int side) {
  ModelSpec spec;
  spec.backbone = resnet ? BackboneSpec::resnet18(side) : BackboneSpec::tiny(side, 64);
  spec.head.kind = kind;
  spec.head.num_classes = 7;
  spec.head.schema = AttributeSchema::raf_default();
  return spec;
}

Tensor noise(std::size_t n, int side, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({n, 3, static_cast<std::size_t>(side), static_cast<std::size_t>(side)});
  for (auto& v : t.values()) v = rng.uniform();
  return t;
}

}  // namespace

static void BM_ForwardTiny(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const ModelBundle bundle(bench_spec(HeadKind::baseline, false, side), 1);
  const Tensor images = noise(32, side, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward_baseline(bundle, images));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ForwardTiny)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_ForwardResnet18(benchmark::State& state) {
  const ModelBundle bundle(bench_spec(HeadKind::baseline, true, 64), 1);
  const Tensor images = noise(4, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward_baseline(bundle, images));
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_ForwardResnet18)->Unit(benchmark::kMillisecond);

// One disentangled optimisation step: forward, three losses, routed backward, Adam.
static void BM_DisentangledStep(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  ModelBundle bundle(bench_spec(HeadKind::disentangled, false, side), 3);
  const auto& schema = bundle.head().schema;
  const Tensor images = noise(32, side, 4);
  std::vector<int> labels(32);
  AttributeLabels attrs(schema.size(), std::vector<int>(32));
  for (int i = 0; i < 32; ++i) {
    labels[i] = i % 7;
    for (std::size_t j = 0; j < schema.size(); ++j) attrs[j][i] = i % static_cast<int>(schema.group(j).size());
  }
  Adam adam(1e-3);
  for (auto _ : state) {
    TrainingPass pass(bundle, images);
    const auto& out = pass.output();
    HeadGradients g_exp;
    g_exp.expression = nn::softmax_backward(out.expression_probs, expression_loss_grad(out.expression_probs, labels));
    HeadGradients g_s;
    HeadGradients g_conf;
    const auto ds = attribute_loss_grad(out.attribute_probs, attrs);
    const auto dc = confusion_loss_grad(out.attribute_probs, schema);
    for (std::size_t j = 0; j < schema.size(); ++j) {
      g_s.attributes.push_back(nn::softmax_backward(out.attribute_probs[j], ds[j]));
      g_conf.attributes.push_back(nn::softmax_backward(out.attribute_probs[j], dc[j]));
    }
    const auto grads = pass.routed_gradient({{"exp", 1.0, g_exp}, {"s", 1.0, g_s}, {"conf", 1.0, g_conf}});
    adam.step(bundle.params(), grads);
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_DisentangledStep)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_Augment(benchmark::State& state) {
  Rng pixels(5);
  Image img(100, 100, 3);
  for (auto& p : img.pixels) p = static_cast<float>(pixels.uniform());
  AugmentConfig cfg;
  Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(augment(img, rng, cfg));
}
BENCHMARK(BM_Augment)->Unit(benchmark::kMicrosecond);

static void BM_BuildReport(benchmark::State& state) {
  const auto schema = AttributeSchema::raf_default();
  Rng rng(7);
  const auto records = oracle::random_log(rng, static_cast<std::size_t>(state.range(0)), 7, schema);
  ExpressionVocab vocab{"Surprise", "Fear", "Disgust", "Happy", "Sad", "Anger", "Neutral"};
  ReportOptions opts;
  opts.joint_groupings = {{"gender", "race"}};
  for (auto _ : state) benchmark::DoNotOptimize(build_report(records, schema, vocab, opts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildReport)->Arg(3068)->Arg(30000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
