// Copyright 2026 The nextapp Authors.
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

#pragma once

// Reference text-to-text predictor: a conditional frequency model over
// features recovered by parsing prompts through the public grammar. Scores
// are linear interpolations over four backoff levels:
//
//   0  history      longest observed suffix (3, 2, 1) of the app history
//                   (stage 2) or category history (stage 1)
//   1  secondary    the stage-1 result sentence (stage 2) or the place
//                   labels (stage 1)
//   2  time         (weekday, hour)
//   3  global       most frequent targets
//
// Every level first tries a user-specific context keyed by the installed-app
// block, then the population-wide context. Levels without support are
// dropped and the remaining weights renormalized.

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nextapp/backend.hpp"
#include "nextapp/error.hpp"
#include "nextapp/templater.hpp"

namespace nextapp {

inline constexpr std::size_t kBackoffLevels = 4;
using InterpolationWeights = std::array<double, kBackoffLevels>;
inline constexpr InterpolationWeights kDefaultWeights = {0.5, 0.25, 0.15, 0.1};
inline constexpr std::size_t kMaxSuffix = 3;

struct TrainingPair {
  PromptSentence input;
  PromptSentence target;
};

struct ReferenceOptions {
  InterpolationWeights weights = kDefaultWeights;
  TemplateSet templates = TemplateSet::canonical();
  double max_unparseable_ratio = 0.01;
  std::uint64_t seed = 0;
};

inline void validate_weights(const InterpolationWeights& w) {
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("interpolation weights must be >= 0");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("interpolation weights must sum to 1");
}

// Context keys per level, most specific first.
using LevelContexts = std::array<std::vector<std::string>, kBackoffLevels>;

namespace reference_detail {

inline std::string join_suffix(std::span<const std::string> items, std::size_t len) {
  std::string out;
  for (std::size_t i = items.size() - len; i < items.size(); ++i) {
    if (!out.empty()) out += ',';
    out += items[i];
  }
  return out;
}

inline void add_personal(std::vector<std::string>& keys, const std::string& level,
                         const std::string& fingerprint, const std::string& value) {
  if (!fingerprint.empty()) keys.push_back(level + "|" + fingerprint + "|" + value);
}

}  // namespace reference_detail

// Feature contexts of a parsed prompt.
inline LevelContexts extract_contexts(const templater::ParsedPrompt& p, Stage stage) {
  using reference_detail::add_personal;
  LevelContexts levels;
  const std::string fp =
      p.has_installed ? templater::render_installed(p.bundle.installed_apps).text : "";

  std::vector<std::string> history;
  if (stage == Stage::kNextApp) {
    for (auto a : p.bundle.app_history) history.push_back(std::to_string(a));
  } else {
    history = p.bundle.category_history;
  }
  const std::size_t max_len = std::min(kMaxSuffix, history.size());
  for (std::size_t len = max_len; len >= 1; --len) {
    add_personal(levels[0], "h" + std::to_string(len), fp,
                 reference_detail::join_suffix(history, len));
  }
  for (std::size_t len = max_len; len >= 1; --len) {
    levels[0].push_back("h" + std::to_string(len) + "||" +
                        reference_detail::join_suffix(history, len));
  }

  std::optional<std::string> secondary;
  if (stage == Stage::kNextApp && p.stage1) {
    secondary = templater::render_type_result(*p.stage1).text;
  } else if (stage == Stage::kAppType && p.bundle.poi_labels) {
    secondary = text::join(*p.bundle.poi_labels, ",");
  }
  if (secondary) {
    add_personal(levels[1], "s", fp, *secondary);
    levels[1].push_back("s||" + *secondary);
  }

  if (p.bundle.time) {
    const auto t = std::to_string(static_cast<int>(p.bundle.time->weekday)) + "," +
                   std::to_string(p.bundle.time->hour);
    add_personal(levels[2], "t", fp, t);
    levels[2].push_back("t||" + t);
  }

  add_personal(levels[3], "g", fp, "");
  levels[3].push_back("g||");
  return levels;
}

class ReferenceBackend final : public Predictor {
 public:
  struct Counter {
    std::map<std::string, std::uint64_t> targets;
    std::uint64_t total = 0;

    bool operator==(const Counter&) const = default;
  };

  ReferenceBackend() = default;

  // Counts targets per feature context. Pairs whose input or target does not
  // parse are skipped; more than `max_unparseable_ratio` of them is an error.
  static ReferenceBackend fit(std::span<const TrainingPair> pairs, Stage stage,
                              const ReferenceOptions& opts = {}) {
    if (pairs.empty()) throw ConfigError("cannot fit the reference backend on zero pairs");
    validate_weights(opts.weights);
    ReferenceBackend model;
    model.stage_ = stage;
    model.opts_ = opts;
    for (const auto& pair : pairs) {
      const auto target = model.canonical_target(pair.target.text);
      const auto parsed = templater::parse_context(pair.input.text, stage, opts.templates);
      if (!target || !parsed) {
        ++model.unparseable_;
        continue;
      }
      const auto levels = extract_contexts(*parsed, stage);
      for (const auto& keys : levels) {
        for (const auto& key : keys) {
          auto& c = model.contexts_[key];
          ++c.targets[*target];
          ++c.total;
        }
      }
      ++model.fitted_pairs_;
    }
    if (static_cast<double>(model.unparseable_) >
        opts.max_unparseable_ratio * static_cast<double>(pairs.size())) {
      throw DataError(std::to_string(model.unparseable_) + " of " + std::to_string(pairs.size()) +
                      " training pairs could not be parsed");
    }
    return model;
  }

  std::vector<Candidate> generate(const GenerationRequest& request) override {
    return generate_const(request);
  }

  std::vector<Candidate> generate_const(const GenerationRequest& request) const {
    validate(request);
    if (request.stage != stage_) {
      throw ConfigError("reference backend fitted for stage " +
                        std::to_string(static_cast<int>(stage_)) + " got a stage " +
                        std::to_string(static_cast<int>(request.stage)) + " request");
    }
    auto scores = score_all(request.prompt);
    std::vector<std::pair<std::string, double>> ranked(scores.begin(), scores.end());
    std::sort(ranked.begin(), ranked.end(), [this](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return tie_less(a.first, b.first);
    });
    if (ranked.size() > request.num_candidates) ranked.resize(request.num_candidates);
    std::vector<Candidate> out;
    out.reserve(ranked.size());
    for (auto& [t, s] : ranked) out.push_back({std::move(t), s});
    return out;
  }

  // Interpolated probability of every target with non-zero support.
  std::map<std::string, double> score_all(const std::string& prompt) const {
    const auto parsed = templater::parse_context(prompt, stage_, opts_.templates);
    LevelContexts levels;
    if (parsed) {
      levels = extract_contexts(*parsed, stage_);
    } else {
      levels[3] = {"g||"};
    }
    std::array<const Counter*, kBackoffLevels> chosen{};
    double weight_sum = 0.0;
    for (std::size_t l = 0; l < kBackoffLevels; ++l) {
      for (const auto& key : levels[l]) {
        if (const auto* c = find(key); c && c->total > 0) {
          chosen[l] = c;
          weight_sum += opts_.weights[l];
          break;
        }
      }
    }
    std::map<std::string, double> scores;
    if (weight_sum <= 0.0) return scores;
    for (std::size_t l = 0; l < kBackoffLevels; ++l) {
      if (!chosen[l]) continue;
      const double w = opts_.weights[l] / weight_sum;
      for (const auto& [t, c] : chosen[l]->targets) {
        scores[t] += w * static_cast<double>(c) / static_cast<double>(chosen[l]->total);
      }
    }
    return scores;
  }

  const Counter* find(const std::string& context) const {
    const auto it = contexts_.find(context);
    return it == contexts_.end() ? nullptr : &it->second;
  }

  std::string name() const override { return "reference"; }
  Stage stage() const { return stage_; }
  const ReferenceOptions& options() const { return opts_; }
  std::size_t fitted_pairs() const { return fitted_pairs_; }
  std::size_t unparseable_pairs() const { return unparseable_; }
  const std::map<std::string, Counter>& contexts() const { return contexts_; }

  bool operator==(const ReferenceBackend& o) const {
    return stage_ == o.stage_ && opts_.weights == o.opts_.weights && contexts_ == o.contexts_;
  }

  void save(std::ostream& out, const std::string& config_hash) const {
    out << nlohmann::json{{"kind", "reference_model"},
                          {"stage", static_cast<int>(stage_)},
                          {"weights", opts_.weights},
                          {"template_set", opts_.templates.name},
                          {"seed", opts_.seed},
                          {"fitted_pairs", fitted_pairs_},
                          {"unparseable_pairs", unparseable_},
                          {"config_hash", config_hash}}
               .dump()
        << '\n';
    for (const auto& [key, c] : contexts_) {
      out << nlohmann::json{{"context", key}, {"targets", c.targets}}.dump() << '\n';
    }
  }

  static ReferenceBackend load(std::istream& in, std::string* config_hash = nullptr) {
    std::string line;
    if (!std::getline(in, line)) throw ArtifactError("model file is empty");
    const auto header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("kind", "") != "reference_model") {
      throw ArtifactError("not a reference model file");
    }
    ReferenceBackend m;
    m.stage_ = static_cast<Stage>(header.at("stage").get<int>());
    m.opts_.weights = header.at("weights").get<InterpolationWeights>();
    validate_weights(m.opts_.weights);
    const auto ts = TemplateSet::by_name(header.value("template_set", "canonical"));
    if (!ts) throw ArtifactError("unknown template set in model file");
    m.opts_.templates = *ts;
    m.opts_.seed = header.value("seed", std::uint64_t{0});
    m.fitted_pairs_ = header.value("fitted_pairs", std::size_t{0});
    m.unparseable_ = header.value("unparseable_pairs", std::size_t{0});
    if (config_hash) *config_hash = header.value("config_hash", "");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ArtifactError("malformed model line");
      Counter c;
      c.targets = j.at("targets").get<std::map<std::string, std::uint64_t>>();
      for (const auto& [_, v] : c.targets) c.total += v;
      m.contexts_.emplace(j.at("context").get<std::string>(), std::move(c));
    }
    return m;
  }

 private:
  // Targets are stored in their canonical rendering.
  std::optional<std::string> canonical_target(const std::string& text) const {
    if (stage_ == Stage::kNextApp) {
      const auto app = templater::parse_prediction(text);
      if (!app) return std::nullopt;
      return templater::render_target(*app).text;
    }
    const auto dist = templater::parse_type_result(text);
    if (!dist) return std::nullopt;
    return templater::render_type_result(*dist).text;
  }

  // Stage-2 ties break by app id, stage-1 ties by sentence text.
  bool tie_less(const std::string& a, const std::string& b) const {
    if (stage_ == Stage::kNextApp) {
      const auto ia = templater::parse_prediction(a);
      const auto ib = templater::parse_prediction(b);
      if (ia && ib && *ia != *ib) return *ia < *ib;
    }
    return a < b;
  }

  Stage stage_ = Stage::kNextApp;
  ReferenceOptions opts_;
  std::map<std::string, Counter> contexts_;
  std::size_t fitted_pairs_ = 0;
  std::size_t unparseable_ = 0;
};

}  // namespace nextapp
