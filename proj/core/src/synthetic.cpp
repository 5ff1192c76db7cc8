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

#include "fairexpr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "fairexpr/csv.hpp"
#include "fairexpr/errors.hpp"
#include "fairexpr/random.hpp"

namespace fairexpr {
namespace {

constexpr std::array<std::array<float, 3>, 8> kPalette{{
    {0.90F, 0.15F, 0.15F},
    {0.15F, 0.25F, 0.90F},
    {0.15F, 0.80F, 0.20F},
    {0.95F, 0.80F, 0.10F},
    {0.70F, 0.20F, 0.80F},
    {0.10F, 0.80F, 0.80F},
    {0.95F, 0.50F, 0.10F},
    {0.55F, 0.55F, 0.55F},
}};

int draw_categorical(Rng& rng, const std::vector<double>& probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

std::string sample_id(const SynthConfig& cfg, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d", i);
  return cfg.id_prefix + "_" + buf;
}

int band_height(int side) { return std::max(2, side / 5); }

}  // namespace

std::vector<double> default_marginals(const AttributeGroup& group) {
  static const std::map<std::string, std::vector<double>> kRaf{
      {"race", {0.774, 0.071, 0.155}},
      {"gender", {0.437, 0.563}},
      {"age", {0.055, 0.164, 0.575, 0.174, 0.032}},
  };
  if (auto it = kRaf.find(group.name); it != kRaf.end() && it->second.size() == group.size()) return it->second;
  return std::vector<double>(group.size(), 1.0 / static_cast<double>(group.size()));
}

std::vector<int> default_link(int num_classes, std::size_t num_categories) {
  std::vector<int> link(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) link[static_cast<std::size_t>(c)] = std::min(c, static_cast<int>(num_categories) - 1);
  return link;
}

std::vector<double> SynthConfig::marginals_for(std::size_t group) const {
  const auto& g = schema.group(group);
  if (auto it = marginals.find(g.name); it != marginals.end()) return it->second;
  return default_marginals(g);
}

std::vector<int> SynthConfig::link_for(std::size_t group) const {
  const auto& g = schema.group(group);
  if (auto it = link.find(g.name); it != link.end()) return it->second;
  return default_link(num_classes(), g.size());
}

void SynthConfig::validate() const {
  if (n_samples < 1) throw ValidationError("synth: n_samples must be at least 1");
  if (image_side < 16) throw ValidationError("synth: image_side must be at least 16");
  if (num_classes() < 2) throw ValidationError("synth: need at least two classes");
  if (schema.empty()) throw ValidationError("synth: schema has no attribute groups");
  if (!(noise_std >= 0.0) || !(amplitude > 0.0) || amplitude > 0.5) {
    throw ValidationError("synth: need noise_std >= 0 and amplitude in (0, 0.5]");
  }
  if (!(cue_strength >= 0.0 && cue_strength <= 1.0) || !(cue_jitter >= 0.0)) {
    throw ValidationError("synth: need cue_strength in [0, 1] and cue_jitter >= 0");
  }
  if (!(clarity_min >= 0.5) || clarity_min > 1.0) throw ValidationError("synth: clarity_min must be in [0.5, 1]");
  for (const auto& [name, rho] : bias) {
    if (!schema.find(name)) throw ValidationError("synth: bias names unknown group '" + name + "'");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("synth: bias for '" + name + "' must be in [0, 1]");
  }
  for (const auto& [name, probs] : marginals) {
    auto j = schema.find(name);
    if (!j) throw ValidationError("synth: marginals name unknown group '" + name + "'");
    if (probs.size() != schema.group(*j).size()) {
      throw ValidationError("synth: marginals for '" + name + "' have " + std::to_string(probs.size()) +
                            " entries, group has " + std::to_string(schema.group(*j).size()) + " categories");
    }
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw ValidationError("synth: negative marginal for '" + name + "'");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("synth: marginals for '" + name + "' do not sum to 1");
  }
  for (const auto& [name, classes] : link) {
    auto j = schema.find(name);
    if (!j) throw ValidationError("synth: link names unknown group '" + name + "'");
    if (classes.size() != vocab.size()) throw ValidationError("synth: link for '" + name + "' needs one entry per class");
    for (int c : classes) {
      if (c < 0 || c >= static_cast<int>(schema.group(*j).size())) {
        throw ValidationError("synth: link for '" + name + "' has an out-of-range category");
      }
    }
  }
}

SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const int side = cfg.image_side;
  const int k = cfg.num_classes();
  const int band = band_height(side);
  const auto m = cfg.schema.size();
  std::vector<std::vector<double>> marg(m);
  std::vector<std::vector<int>> link(m);
  std::vector<double> rho(m, -1.0);
  for (std::size_t j = 0; j < m; ++j) {
    marg[j] = cfg.marginals_for(j);
    link[j] = cfg.link_for(j);
    if (auto it = cfg.bias.find(cfg.schema.group(j).name); it != cfg.bias.end()) rho[j] = it->second;
  }
  const double period = side / 6.0;

  SynthDataset out;
  out.samples.reserve(static_cast<std::size_t>(cfg.n_samples));
  for (int i = 0; i < cfg.n_samples; ++i) {
    Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(i));
    Sample s;
    s.id = sample_id(cfg, i);
    s.expression = static_cast<int>(rng.uniform_int(0, k - 1));
    for (std::size_t j = 0; j < m; ++j) {
      int cat = 0;
      if (rho[j] >= 0.0 && rng.bernoulli(rho[j])) {
        cat = link[j][static_cast<std::size_t>(s.expression)];
      } else {
        cat = draw_categorical(rng, marg[j]);
      }
      s.attributes.push_back(cat);
    }
    const double clarity = rng.uniform(cfg.clarity_min, 1.0);
    const int distractor = static_cast<int>((s.expression + 1 + rng.uniform_int(0, k - 2)) % k);
    const double phase_a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double phase_b = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double theta_a = std::numbers::pi * s.expression / k;
    const double theta_b = std::numbers::pi * distractor / k;
    const double ca = std::cos(theta_a), sa = std::sin(theta_a);
    const double cb = std::cos(theta_b), sb = std::sin(theta_b);
    const double w = 2.0 * std::numbers::pi / period;
    std::vector<std::array<float, 3>> tint(m);
    for (std::size_t j = 0; j < m; ++j) {
      const auto& colour = kPalette[static_cast<std::size_t>(s.attributes[j]) % kPalette.size()];
      for (std::size_t c = 0; c < 3; ++c) {
        const double offset = cfg.cue_jitter > 0.0 ? cfg.cue_jitter * rng.normal() : 0.0;
        tint[j][c] = static_cast<float>(0.5 + cfg.cue_strength * (colour[c] - 0.5) + offset);
      }
    }

    Image img(side, side, 3);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        std::array<float, 3> base{};
        if (y < band) {
          const auto j = std::min<std::size_t>(m - 1, static_cast<std::size_t>(x) * m / static_cast<std::size_t>(side));
          base = tint[j];
        } else {
          const double g = clarity * std::sin(w * (x * ca + y * sa) + phase_a) +
                           (1.0 - clarity) * std::sin(w * (x * cb + y * sb) + phase_b);
          base.fill(static_cast<float>(0.5 + cfg.amplitude * g));
        }
        for (int c = 0; c < 3; ++c) {
          const double v = base[static_cast<std::size_t>(c)] + cfg.noise_std * rng.normal();
          img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    s.image = quantize_8bit(img);

    ManifestRow row;
    row.id = s.id;
    row.path = "images/" + s.id + ".png";
    row.expression = cfg.vocab[static_cast<std::size_t>(s.expression)];
    for (std::size_t j = 0; j < m; ++j) {
      row.attributes.push_back(cfg.schema.group(j).categories[static_cast<std::size_t>(s.attributes[j])]);
    }
    out.rows.push_back(std::move(row));
    out.samples.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const SynthConfig& cfg, const SynthDataset& data) {
  std::filesystem::create_directories(dir / "images");
  for (std::size_t i = 0; i < data.samples.size(); ++i) write_png(dir / data.rows[i].path, data.samples[i].image);
  write_manifest(dir / "manifest.csv", cfg.schema, data.rows);
}

std::size_t ContingencyTable::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto v : row) n += v;
  }
  return n;
}

std::vector<double> ContingencyTable::category_marginals() const {
  const auto n = total();
  std::vector<double> out(counts.empty() ? 0 : counts.front().size(), 0.0);
  if (n == 0) return out;
  for (const auto& row : counts) {
    for (std::size_t s = 0; s < row.size(); ++s) out[s] += static_cast<double>(row[s]);
  }
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

BiasAudit bias_audit(const std::vector<Sample>& samples, const AttributeSchema& schema, int num_classes) {
  BiasAudit audit;
  audit.n_samples = samples.size();
  for (const auto& g : schema.groups()) {
    audit.tables.push_back({g.name, std::vector<std::vector<std::size_t>>(static_cast<std::size_t>(num_classes),
                                                                          std::vector<std::size_t>(g.size(), 0))});
  }
  for (const auto& s : samples) {
    validate_attributes(s.attributes, schema);
    if (s.expression < 0 || s.expression >= num_classes) {
      throw ValidationError("bias_audit: sample '" + s.id + "' has expression index out of range");
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
      ++audit.tables[j].counts[static_cast<std::size_t>(s.expression)][static_cast<std::size_t>(s.attributes[j])];
    }
  }
  return audit;
}

double mutual_information(const ContingencyTable& table) {
  const double n = static_cast<double>(table.total());
  if (n == 0.0) return 0.0;
  const auto rows = table.counts.size();
  const auto cols = table.counts.front().size();
  std::vector<double> pr(rows, 0.0), pc(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      pr[r] += static_cast<double>(table.counts[r][c]) / n;
      pc[c] += static_cast<double>(table.counts[r][c]) / n;
    }
  }
  double mi = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double p = static_cast<double>(table.counts[r][c]) / n;
      if (p > 0.0) mi += p * std::log(p / (pr[r] * pc[c]));
    }
  }
  return mi;
}

std::string audit_to_markdown(const BiasAudit& audit, const AttributeSchema& schema, const ExpressionVocab& vocab) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  for (std::size_t j = 0; j < audit.tables.size(); ++j) {
    const auto& t = audit.tables[j];
    const auto& g = schema.group(j);
    os << "### " << g.name << "\n\n| Class |";
    for (const auto& c : g.categories) os << ' ' << c << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < g.size(); ++i) os << "---|";
    os << '\n';
    for (std::size_t k = 0; k < t.counts.size(); ++k) {
      os << "| " << vocab.at(k) << " |";
      for (auto v : t.counts[k]) os << ' ' << v << " |";
      os << '\n';
    }
    os << "| Percentage |";
    for (double p : t.category_marginals()) os << ' ' << p * 100.0 << "% |";
    os << "\n\n";
  }
  return os.str();
}

std::string audit_to_csv(const BiasAudit& audit, const AttributeSchema& schema, const ExpressionVocab& vocab) {
  std::ostringstream os;
  os << "group,class,category,count\n";
  for (std::size_t j = 0; j < audit.tables.size(); ++j) {
    const auto& g = schema.group(j);
    for (std::size_t k = 0; k < audit.tables[j].counts.size(); ++k) {
      for (std::size_t s = 0; s < g.size(); ++s) {
        os << csv::join({g.name, vocab.at(k), g.categories[s], std::to_string(audit.tables[j].counts[k][s])}) << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace fairexpr
