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

#include "fairexpr/commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>

#include "fairexpr/checkpoint.hpp"
#include "fairexpr/compare.hpp"
#include "fairexpr/config.hpp"
#include "fairexpr/csv.hpp"
#include "fairexpr/errors.hpp"
#include "fairexpr/fairness.hpp"
#include "fairexpr/ingestion.hpp"
#include "fairexpr/synthetic.hpp"
#include "fairexpr/trainer.hpp"

namespace fairexpr {
namespace {

namespace fs = std::filesystem;

constexpr const char* kResolvedConfig = "resolved_config.yaml";
constexpr const char* kPredictions = "predictions.csv";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

/// Config from --config, with --seed and --out applied.
ExperimentConfig config_from(const CommandOptions& opts, const std::optional<fs::path>& fallback = std::nullopt) {
  fs::path path;
  if (opts.config) {
    path = *opts.config;
  } else if (fallback) {
    path = *fallback;
  } else {
    throw UsageError("--config is required");
  }
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  auto cfg = load_config(path);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.train.seed = *opts.seed;
  }
  return cfg;
}

std::vector<Sample> load_dataset(const ExperimentConfig& cfg, std::ostream& log, bool quiet) {
  const auto manifest = cfg.manifest_path();
  if (cfg.dataset.synth && !fs::exists(manifest)) {
    if (!quiet) log << "synthesising dataset into " << cfg.dataset.synth_dir.string() << '\n';
    write_dataset(cfg.dataset.synth_dir, *cfg.dataset.synth, generate(*cfg.dataset.synth));
  }
  if (!fs::exists(manifest)) throw ConfigError("manifest not found: " + manifest.string(), "dataset.manifest");
  return load_manifest(manifest, cfg.schema, cfg.vocab, cfg.dataset.loading);
}

DatasetSplit split_dataset(const ExperimentConfig& cfg, std::vector<Sample> samples) {
  const bool tagged = !samples.empty() && std::all_of(samples.begin(), samples.end(),
                                                      [](const Sample& s) { return !s.split.empty(); });
  if (tagged) return split_by_tag(std::move(samples));
  return split_deterministic(std::move(samples), cfg.dataset.split, cfg.seed);
}

fs::path run_directory(const CommandOptions& opts, const ExperimentConfig& cfg) {
  return opts.out ? *opts.out : cfg.output_dir;
}

}  // namespace

int cmd_synth(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = config_from(opts);
    if (!cfg.dataset.synth) throw ConfigError("synth needs a 'dataset.synth' section", "dataset.synth");
    if (opts.seed) cfg.dataset.synth->seed = *opts.seed;
    if (opts.out) cfg.dataset.synth_dir = *opts.out;
    const auto& sc = *cfg.dataset.synth;
    const auto data = generate(sc);
    write_dataset(cfg.dataset.synth_dir, sc, data);
    const auto audit = bias_audit(data.samples, sc.schema, sc.num_classes());
    write_text(cfg.dataset.synth_dir / "audit.md", audit_to_markdown(audit, sc.schema, sc.vocab));
    write_text(cfg.dataset.synth_dir / "audit.csv", audit_to_csv(audit, sc.schema, sc.vocab));
    write_text(cfg.dataset.synth_dir / kResolvedConfig, resolved_yaml(cfg));
    if (!opts.quiet) {
      log << "wrote " << data.samples.size() << " samples to " << cfg.dataset.synth_dir.string() << '\n';
    }
    return kExitOk;
  });
}

int cmd_train(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = config_from(opts);
    const auto run_dir = run_directory(opts, cfg);
    cfg.output_dir = run_dir;
    auto split = split_dataset(cfg, load_dataset(cfg, log, opts.quiet));
    if (split.train.empty()) throw ValidationError("the training split is empty");
    fs::create_directories(run_dir);
    write_text(run_dir / kResolvedConfig, resolved_yaml(cfg));
    {
      std::ostringstream ids;
      ids << "id,split\n";
      for (const auto* part : {&split.train, &split.val, &split.test}) {
        const char* name = part == &split.train ? "train" : part == &split.val ? "val" : "test";
        for (const auto& s : *part) ids << csv::join({s.id, name}) << '\n';
      }
      write_text(run_dir / "splits.csv", ids.str());
    }
    if (!opts.quiet) {
      log << "training " << to_string(cfg.train.approach) << " on " << split.train.size() << " samples ("
          << split.val.size() << " validation)\n";
    }
    TrainHooks hooks;
    if (!opts.quiet) {
      hooks.on_epoch = [&](const EpochLogRow& row) {
        log << "epoch " << row.epoch << " lr " << csv::format_double(row.lr);
        if (row.val_monitor) log << " val class-wise accuracy " << csv::format_double(*row.val_monitor);
        log << '\n';
      };
    }
    const auto result = train(ModelBundle(cfg.model_spec(), cfg.seed), split.train, split.val, cfg.train, run_dir, hooks);
    if (!opts.quiet) {
      log << "best epoch " << result.best_epoch << ", checkpoint " << result.best_checkpoint.string() << '\n';
    }
    return kExitOk;
  });
}

int cmd_eval(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (opts.inputs.size() > 1) throw UsageError("eval takes at most one run directory");
    std::optional<fs::path> run_dir;
    if (!opts.inputs.empty()) run_dir = opts.inputs.front();
    auto cfg = config_from(opts, run_dir ? std::optional(*run_dir / kResolvedConfig) : std::nullopt);
    const fs::path dir = run_dir ? *run_dir : run_directory(opts, cfg);
    const auto stem = dir / "checkpoints" / "best";
    if (!fs::exists(stem.string() + ".json")) throw ConfigError("no checkpoint in " + dir.string());
    const auto ck = load_checkpoint(stem);
    if (!(ck.bundle.head().schema == cfg.schema) || ck.bundle.head().num_classes != static_cast<int>(cfg.vocab.size())) {
      throw ValidationError("checkpoint schema or class count does not match the configuration");
    }
    auto split = split_dataset(cfg, load_dataset(cfg, log, opts.quiet));
    const std::vector<Sample>* set = nullptr;
    if (opts.split == "test") {
      set = &split.test;
    } else if (opts.split == "val") {
      set = &split.val;
    } else if (opts.split == "train") {
      set = &split.train;
    } else {
      throw UsageError("unknown split '" + opts.split + "' (expected train, val or test)");
    }
    if (set->empty()) throw ValidationError("the " + opts.split + " split is empty");
    const auto records = evaluate(ck.bundle, *set, cfg.train.batch_size);
    const auto out = opts.split == "test" ? dir / kPredictions : dir / ("predictions_" + opts.split + ".csv");
    write_predictions(out, records, cfg.schema, cfg.vocab);
    if (!opts.quiet) log << "wrote " << records.size() << " predictions to " << out.string() << '\n';
    return kExitOk;
  });
}

int cmd_report(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (opts.inputs.size() != 1) throw UsageError("report takes one run directory or predictions file");
    const auto& input = opts.inputs.front();
    fs::path predictions;
    std::optional<fs::path> fallback;
    fs::path out_dir;
    if (fs::is_directory(input)) {
      predictions = input / kPredictions;
      fallback = input / kResolvedConfig;
      out_dir = input;
    } else {
      predictions = input;
      out_dir = input.has_parent_path() ? input.parent_path() : fs::path(".");
    }
    if (opts.out) out_dir = *opts.out;
    if (!fs::exists(predictions)) throw ConfigError("predictions not found: " + predictions.string());
    const auto cfg = config_from(opts, fallback);
    const auto records = read_predictions(predictions, cfg.schema, cfg.vocab);
    const auto report = build_report(records, cfg.schema, cfg.vocab, cfg.report);
    write_text(out_dir / "report.json", report_to_json(report));
    write_text(out_dir / "report.md", report_to_markdown(report, "Evaluation report: " + cfg.name));
    if (!opts.quiet) log << "wrote " << (out_dir / "report.json").string() << " and report.md\n";
    return kExitOk;
  });
}

int cmd_compare(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (opts.inputs.size() < 2) throw UsageError("compare needs at least two run directories");
    std::vector<ComparisonColumn> columns;
    std::optional<std::vector<std::string>> reference_set;
    fs::path reference_run;
    for (const auto& dir : opts.inputs) {
      const auto cfg_path = dir / kResolvedConfig;
      const auto pred_path = dir / kPredictions;
      if (!fs::exists(cfg_path) || !fs::exists(pred_path)) {
        throw ConfigError("run directory " + dir.string() + " lacks " + kResolvedConfig + " or " + kPredictions);
      }
      const auto cfg = load_config(cfg_path);
      const auto records = read_predictions(pred_path, cfg.schema, cfg.vocab);
      std::vector<std::string> identity;
      for (const auto& r : records) {
        std::string key = r.id + ":" + std::to_string(r.truth);
        for (int a : r.attributes) key += ":" + std::to_string(a);
        identity.push_back(std::move(key));
      }
      std::sort(identity.begin(), identity.end());
      if (!reference_set) {
        reference_set = std::move(identity);
        reference_run = dir;
      } else if (identity != *reference_set) {
        throw ValidationError("runs " + reference_run.string() + " and " + dir.string() +
                              " were evaluated on different sample sets");
      }
      columns.push_back({dir.string(), cfg.train.approach, cfg.train.augment.enabled,
                         build_report(records, cfg.schema, cfg.vocab, cfg.report)});
    }
    const auto matrix = build_comparison(std::move(columns));
    const fs::path out_dir = opts.out ? *opts.out : fs::path("comparison");
    write_text(out_dir / "comparison.md", comparison_markdown(matrix));
    write_text(out_dir / "comparison.txt", comparison_text(matrix));
    write_text(out_dir / "comparison.json", comparison_json(matrix));
    if (!opts.quiet) log << "wrote comparison tables to " << out_dir.string() << '\n';
    return kExitOk;
  });
}

}  // namespace fairexpr
