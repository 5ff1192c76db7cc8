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

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "fairexpr/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fairexpr: fairness-aware facial expression recognition toolkit"};
  app.require_subcommand(1);

  fairexpr::CommandOptions opts;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Experiment config (YAML)");
    cmd->add_option("--seed", seed, "Override the experiment seed");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_flag("-q,--quiet", opts.quiet, "Suppress progress output");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic biased dataset");
  add_common(synth);
  auto* train = app.add_subcommand("train", "Train a model; writes a run directory");
  add_common(train);
  auto* eval = app.add_subcommand("eval", "Evaluate the best checkpoint of a run");
  add_common(eval);
  eval->add_option("run_dir", inputs, "Run directory (defaults to the config output directory)")->expected(0, 1);
  eval->add_option("--split", opts.split, "Split to evaluate: train, val or test");
  auto* report = app.add_subcommand("report", "Accuracy and fairness report from predictions");
  add_common(report);
  report->add_option("input", inputs, "Run directory or predictions CSV")->required()->expected(1);
  auto* compare = app.add_subcommand("compare", "Compare runs side by side");
  add_common(compare);
  compare->add_option("runs", inputs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fairexpr::kExitConfig;
  }

  if (!config.empty()) opts.config = config;
  if (!out.empty()) opts.out = out;
  for (auto* cmd : {synth, train, eval, report, compare}) {
    if (cmd->parsed() && cmd->count("--seed") > 0) opts.seed = seed;
  }
  for (const auto& in : inputs) opts.inputs.emplace_back(in);

  if (synth->parsed()) return fairexpr::cmd_synth(opts, std::cout, std::cerr);
  if (train->parsed()) return fairexpr::cmd_train(opts, std::cout, std::cerr);
  if (eval->parsed()) return fairexpr::cmd_eval(opts, std::cout, std::cerr);
  if (report->parsed()) return fairexpr::cmd_report(opts, std::cout, std::cerr);
  return fairexpr::cmd_compare(opts, std::cout, std::cerr);
}
