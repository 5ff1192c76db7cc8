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

#include "fairexpr/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fairexpr/csv.hpp"
#include "fairexpr/errors.hpp"
#include "fairexpr/optimizer.hpp"

namespace fairexpr {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("must be at least 1", "train.batch_size");
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw ConfigError("must be positive", "train.initial_lr");
  if (!(lr_decay_factor > 0.0) || lr_decay_factor > 1.0) {
    throw ConfigError("must be in (0, 1]", "train.lr_decay_factor");
  }
  if (lr_decay_every_epochs < 1) throw ConfigError("must be at least 1", "train.lr_decay_every_epochs");
  if (max_epochs < 1) throw ConfigError("must be at least 1", "train.max_epochs");
  if (early_stop_patience_epochs < 1) throw ConfigError("must be at least 1", "train.early_stop_patience_epochs");
  if (early_stop_patience_epochs > max_epochs) {
    throw ConfigError("must not exceed train.max_epochs", "train.early_stop_patience_epochs");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("must be non-negative", "alpha");
}

TrainConfig TrainConfig::raf_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::celeba_defaults() {
  TrainConfig cfg;
  cfg.lr_decay_every_epochs = 2;
  cfg.early_stop_patience_epochs = 5;
  return cfg;
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  return cfg.initial_lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every_epochs);
}

bool EarlyStopping::update(double monitor) {
  if (!seen_ || monitor > best_) {
    seen_ = true;
    best_ = monitor;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

void write_step_log(const std::filesystem::path& path, const std::vector<StepLogRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "step,exp,s,conf,total,alpha\n";
  for (const auto& r : rows) {
    os << r.step << ',' << csv::format_double(r.loss.exp) << ',' << csv::format_double(r.loss.s) << ','
       << csv::format_double(r.loss.conf) << ',' << csv::format_double(r.loss.total) << ','
       << csv::format_double(r.loss.alpha) << '\n';
  }
}

void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochLogRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "epoch,val_monitor,lr\n";
  for (const auto& r : rows) {
    os << r.epoch << ',' << (r.val_monitor ? csv::format_double(*r.val_monitor) : "") << ','
       << csv::format_double(r.lr) << '\n';
  }
}

int argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

namespace {

void check_samples(const ModelBundle& bundle, std::span<const Sample> samples, const char* which) {
  const int k = bundle.head().num_classes;
  const int side = bundle.backbone().spec().input_side;
  for (const auto& s : samples) {
    if (s.expression < 0 || s.expression >= k) {
      throw ValidationError(std::string(which) + " sample '" + s.id + "' has expression index out of range");
    }
    if (s.image.height < side || s.image.width < side) {
      throw ValidationError(std::string(which) + " sample '" + s.id + "' is smaller than the model input");
    }
    if (bundle.kind() != HeadKind::baseline || !bundle.head().schema.empty()) {
      validate_attributes(s.attributes, bundle.head().schema);
    }
  }
}

struct Batch {
  Tensor images;
  Tensor attributes;
  std::vector<int> labels;
  AttributeLabels attribute_labels;
};

Batch make_batch(const ModelBundle& bundle, std::span<const Sample> samples, std::span<const std::size_t> order,
                 const TrainConfig* train_cfg, int epoch) {
  const int side = bundle.backbone().spec().input_side;
  std::vector<Image> images;
  std::vector<std::vector<int>> attrs;
  Batch b;
  const auto m = bundle.head().schema.size();
  if (bundle.kind() == HeadKind::disentangled) b.attribute_labels.assign(m, {});
  for (auto idx : order) {
    const auto& s = samples[idx];
    if (train_cfg && train_cfg->augment.enabled) {
      Rng rng = Rng::derive(train_cfg->seed, hash_text(s.id), static_cast<std::uint64_t>(epoch) + 1);
      images.push_back(augment(s.image, rng, train_cfg->augment));
    } else {
      images.push_back(center_crop(s.image, side));
    }
    b.labels.push_back(s.expression);
    if (bundle.kind() == HeadKind::attribute_aware) attrs.push_back(s.attributes);
    for (std::size_t j = 0; j < b.attribute_labels.size(); ++j) b.attribute_labels[j].push_back(s.attributes[j]);
  }
  b.images = images_to_batch(images);
  if (bundle.kind() == HeadKind::attribute_aware) b.attributes = attributes_to_batch(attrs, bundle.head().schema);
  return b;
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

}  // namespace

std::vector<PredictionRecord> evaluate(const ModelBundle& bundle, std::span<const Sample> samples, int batch_size) {
  if (batch_size < 1) throw ValidationError("evaluate: batch_size must be at least 1");
  check_samples(bundle, samples, "evaluation");
  const auto order = identity_order(samples.size());
  std::vector<PredictionRecord> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(batch_size), samples.size() - start);
    const auto idx = std::span(order).subspan(start, count);
    auto batch = make_batch(bundle, samples, idx, nullptr, 0);
    const auto result = predict(bundle, batch.images, batch.attributes.empty() ? nullptr : &batch.attributes);
    const auto k = result.expression_probs.dim(1);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& s = samples[start + i];
      PredictionRecord r;
      r.id = s.id;
      r.truth = s.expression;
      r.probs.assign(result.expression_probs.data() + i * k, result.expression_probs.data() + (i + 1) * k);
      r.predicted = argmax(r.probs);
      r.attributes = s.attributes;
      out.push_back(std::move(r));
    }
  }
  return out;
}

TrainResult train(ModelBundle bundle, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const TrainConfig& cfg, const std::filesystem::path& out_dir, const TrainHooks& hooks) {
  cfg.validate();
  if (bundle.kind() != cfg.approach) {
    throw ConfigError("model head '" + std::string(to_string(bundle.kind())) + "' does not match approach '" +
                          std::string(to_string(cfg.approach)) + "'",
                      "approach");
  }
  if (train_set.empty()) throw ValidationError("training set is empty");
  const int side = bundle.backbone().spec().input_side;
  if (cfg.augment.enabled && cfg.augment.crop_size != side) {
    throw ConfigError("crop size " + std::to_string(cfg.augment.crop_size) + " differs from model input side " +
                          std::to_string(side),
                      "augment.crop_size");
  }
  check_samples(bundle, train_set, "training");
  check_samples(bundle, val_set, "validation");
  for (const auto& s : train_set) {
    if (cfg.augment.enabled) cfg.augment.validate(s.image.height);
  }

  const bool write = !out_dir.empty();
  const auto ckpt_dir = out_dir / "checkpoints";
  if (write) std::filesystem::create_directories(ckpt_dir);

  TrainResult result;
  Adam optimizer(cfg.initial_lr);
  EarlyStopping stopper(cfg.early_stop_patience_epochs);
  const auto& schema = bundle.head().schema;
  std::int64_t step = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    optimizer.set_learning_rate(lr);
    auto order = identity_order(train_set.size());
    Rng order_rng = Rng::derive(cfg.seed, 0x0def, static_cast<std::uint64_t>(epoch));
    shuffle(order.begin(), order.end(), order_rng);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto count = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      auto batch = make_batch(bundle, train_set, std::span(order).subspan(start, count), &cfg, epoch);
      if (hooks.before_step) hooks.before_step(step, bundle);

      TrainingPass pass(bundle, batch.images, batch.attributes.empty() ? nullptr : &batch.attributes);
      const auto& out = pass.output();
      const double l_exp = expression_loss(out.expression_probs, batch.labels);
      std::vector<WeightedLoss> losses;
      HeadGradients g_exp;
      g_exp.expression =
          nn::softmax_backward(out.expression_probs, expression_loss_grad(out.expression_probs, batch.labels));
      losses.push_back({"exp", 1.0, std::move(g_exp)});
      double l_s = 0.0;
      double l_conf = 0.0;
      if (bundle.kind() == HeadKind::disentangled) {
        l_s = attribute_loss(out.attribute_probs, batch.attribute_labels);
        l_conf = confusion_loss(out.attribute_probs, schema);
        const auto ds = attribute_loss_grad(out.attribute_probs, batch.attribute_labels);
        const auto dc = confusion_loss_grad(out.attribute_probs, schema);
        HeadGradients g_s;
        HeadGradients g_conf;
        for (std::size_t j = 0; j < schema.size(); ++j) {
          g_s.attributes.push_back(nn::softmax_backward(out.attribute_probs[j], ds[j]));
          g_conf.attributes.push_back(nn::softmax_backward(out.attribute_probs[j], dc[j]));
        }
        losses.push_back({"s", 1.0, std::move(g_s)});
        losses.push_back({"conf", cfg.alpha, std::move(g_conf)});
      }
      LossBreakdown breakdown;
      try {
        breakdown = total_loss(l_exp, l_s, l_conf, cfg.alpha);
      } catch (const NumericError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": " + e.what());
      }
      const auto grads = pass.routed_gradient(losses);
      optimizer.step(bundle.params(), grads);
      result.log.steps.push_back({step, breakdown});
      ++step;
    }

    EpochLogRow row{epoch, std::nullopt, lr};
    bool improved = false;
    if (!val_set.empty()) {
      const auto preds = evaluate(bundle, val_set, cfg.batch_size);
      row.val_monitor = mean_recall(per_class_recall(preds).value_or(RecallMap{})).value_or(0.0);
      improved = stopper.update(*row.val_monitor);
    } else {
      improved = true;
    }
    result.log.epochs.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);

    const CheckpointMeta meta{epoch, step, row.val_monitor.value_or(0.0),
                              Rng::derive(cfg.seed, 0x0def, static_cast<std::uint64_t>(epoch) + 1).to_string()};
    if (improved) {
      result.best_bundle = bundle;
      result.best_epoch = epoch;
      result.best_monitor = meta.monitor;
      if (write) save_checkpoint(ckpt_dir / "best", bundle, meta);
    }
    if (write) {
      save_checkpoint(ckpt_dir / "last", bundle, meta);
      write_step_log(out_dir / "train_log.csv", result.log.steps);
      write_epoch_log(out_dir / "epoch_log.csv", result.log.epochs);
    }
    result.state = {epoch, step, lr, val_set.empty() ? 0.0 : stopper.best(), stopper.epochs_since_best(),
                    meta.rng_state};
    if (!val_set.empty() && stopper.should_stop()) {
      result.stopped_early = epoch + 1 < cfg.max_epochs;
      break;
    }
  }
  result.final_bundle = std::move(bundle);
  if (write) result.best_checkpoint = ckpt_dir / "best";
  return result;
}

Tensor extract_features(const ModelBundle& bundle, std::span<const Sample> samples, int batch_size) {
  const auto d = static_cast<std::size_t>(bundle.backbone().feature_dim());
  const int side = bundle.backbone().spec().input_side;
  Tensor out({samples.size(), d});
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(batch_size), samples.size() - start);
    std::vector<Image> images;
    for (std::size_t i = 0; i < count; ++i) images.push_back(center_crop(samples[start + i].image, side));
    const auto phi = bundle.backbone().infer(bundle.params(), images_to_batch(images));
    std::copy(phi.data(), phi.data() + count * d, out.data() + start * d);
  }
  return out;
}

double fit_probe(const Tensor& train_features, std::span<const int> train_labels, const Tensor& test_features,
                 std::span<const int> test_labels, int num_classes, const ProbeConfig& cfg) {
  if (train_features.rank() != 2 || test_features.rank() != 2 || train_features.dim(1) != test_features.dim(1)) {
    throw ValidationError("fit_probe: feature matrices must be {N, D} with equal D");
  }
  const std::size_t n = train_features.dim(0);
  const std::size_t d = train_features.dim(1);
  const auto k = static_cast<std::size_t>(num_classes);
  if (n == 0 || train_labels.size() != n || test_labels.size() != test_features.dim(0) || num_classes < 2) {
    throw ValidationError("fit_probe: label counts do not match features");
  }
  for (int y : train_labels) {
    if (y < 0 || y >= num_classes) throw ValidationError("fit_probe: label out of range");
  }
  std::vector<double> mean(d, 0.0);
  std::vector<double> scale(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += train_features.at(i, c);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      const double v = train_features.at(i, c) - mean[c];
      scale[c] += v * v;
    }
  }
  for (auto& s : scale) {
    s = std::sqrt(s / static_cast<double>(n));
    s = s > 1e-12 ? 1.0 / s : 0.0;
  }
  auto standardise = [&](const Tensor& f) {
    Tensor z(f.shape());
    for (std::size_t i = 0; i < f.dim(0); ++i) {
      for (std::size_t c = 0; c < d; ++c) z[i * d + c] = (f.at(i, c) - mean[c]) * scale[c];
    }
    return z;
  };
  const Tensor x = standardise(train_features);

  // Parameters: W {d, k} then b {k}, optimised with Adam moments.
  std::vector<double> w((d + 1) * k, 0.0), m(w.size(), 0.0), v(w.size(), 0.0), g(w.size());
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> logits(k);
  for (int it = 1; it <= cfg.iterations; ++it) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) logits[j] = w[d * k + j];
      for (std::size_t c = 0; c < d; ++c) {
        const double xc = x[i * d + c];
        if (xc == 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) logits[j] += xc * w[c * k + j];
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (auto& l : logits) z += (l = std::exp(l - mx));
      for (std::size_t j = 0; j < k; ++j) {
        const double err = (logits[j] / z - (static_cast<int>(j) == train_labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
        g[d * k + j] += err;
        for (std::size_t c = 0; c < d; ++c) g[c * k + j] += err * x[i * d + c];
      }
    }
    const double c1 = 1.0 - std::pow(b1, it);
    const double c2 = 1.0 - std::pow(b2, it);
    for (std::size_t p = 0; p < w.size(); ++p) {
      m[p] = b1 * m[p] + (1 - b1) * g[p];
      v[p] = b2 * v[p] + (1 - b2) * g[p] * g[p];
      w[p] -= cfg.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + eps);
    }
  }

  const Tensor xt = standardise(test_features);
  if (xt.dim(0) == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xt.dim(0); ++i) {
    for (std::size_t j = 0; j < k; ++j) logits[j] = w[d * k + j];
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t j = 0; j < k; ++j) logits[j] += xt[i * d + c] * w[c * k + j];
    }
    if (argmax(logits) == test_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(xt.dim(0));
}

double probe_attribute(const ModelBundle& bundle, std::span<const Sample> probe_train,
                       std::span<const Sample> probe_test, const std::string& group_name, const ProbeConfig& cfg) {
  const auto& schema = bundle.head().schema;
  const auto found = schema.find(group_name);
  if (!found) throw ValidationError("probe: group '" + group_name + "' is not in the model schema");
  const auto group = *found;
  auto labels = [&](std::span<const Sample> set) {
    std::vector<int> y;
    for (const auto& s : set) {
      validate_attributes(s.attributes, schema);
      y.push_back(s.attributes[group]);
    }
    return y;
  };
  return fit_probe(extract_features(bundle, probe_train), labels(probe_train), extract_features(bundle, probe_test),
                   labels(probe_test), static_cast<int>(schema.group(group).size()), cfg);
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records,
                       const AttributeSchema& schema, const ExpressionVocab& vocab) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  std::vector<std::string> header{"id", "true", "pred"};
  for (std::size_t c = 0; c < vocab.size(); ++c) header.push_back("p_" + std::to_string(c));
  for (const auto& g : schema.groups()) header.push_back(g.name);
  os << csv::join(header) << '\n';
  for (const auto& r : records) {
    if (r.probs.size() != vocab.size()) throw ValidationError("prediction '" + r.id + "' has wrong probability count");
    validate_attributes(r.attributes, schema);
    if (r.truth < 0 || r.truth >= static_cast<int>(vocab.size()) || r.predicted < 0 ||
        r.predicted >= static_cast<int>(vocab.size())) {
      throw ValidationError("prediction '" + r.id + "' has a class index out of range");
    }
    std::vector<std::string> row{r.id, std::to_string(r.truth), std::to_string(r.predicted)};
    for (double p : r.probs) row.push_back(csv::format_double(p));
    for (int a : r.attributes) row.push_back(std::to_string(a));
    os << csv::join(row) << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path, const AttributeSchema& schema,
                                               const ExpressionVocab& vocab) {
  const auto lines = csv::read_lines(path.string());
  if (lines.empty()) throw ValidationError(path.string() + ": empty predictions file");
  const auto k = vocab.size();
  const auto width = 3 + k + schema.size();
  const auto header = csv::parse_line(lines.front().text);
  std::vector<std::string> expected{"id", "true", "pred"};
  for (std::size_t c = 0; c < k; ++c) expected.push_back("p_" + std::to_string(c));
  for (const auto& g : schema.groups()) expected.push_back(g.name);
  if (header != expected) throw ValidationError(path.string() + ":" + std::to_string(lines.front().number) + ": unexpected header");
  auto parse_index = [](const std::string& cell, int limit) -> std::optional<int> {
    int v = -1;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || v < 0 || v >= limit) return std::nullopt;
    return v;
  };
  const int kk = static_cast<int>(k);
  std::vector<PredictionRecord> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto where = path.string() + ":" + std::to_string(lines[li].number) + ": ";
    const auto f = csv::parse_line(lines[li].text);
    if (f.size() != width) throw ValidationError(where + "expected " + std::to_string(width) + " fields");
    PredictionRecord r;
    r.id = f[0];
    auto t = parse_index(f[1], kk);
    auto p = parse_index(f[2], kk);
    if (!t || !p) throw ValidationError(where + "expression index out of range");
    r.truth = *t;
    r.predicted = *p;
    for (std::size_t c = 0; c < k; ++c) {
      const auto& cell = f[3 + c];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ValidationError(where + "malformed probability '" + cell + "'");
      }
      r.probs.push_back(v);
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
      auto idx = parse_index(f[3 + k + j], static_cast<int>(schema.group(j).size()));
      if (!idx) throw ValidationError(where + schema.group(j).name + " index '" + f[3 + k + j] + "' out of range");
      r.attributes.push_back(*idx);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fairexpr
