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

// Two-stage orchestration: training-pair construction for both stages,
// test-case construction, and per-case inference through the backends.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nextapp/backend.hpp"
#include "nextapp/corpus.hpp"
#include "nextapp/error.hpp"
#include "nextapp/parallel.hpp"
#include "nextapp/reference_backend.hpp"
#include "nextapp/templater.hpp"
#include "nextapp/typeprompt.hpp"

namespace nextapp {

struct PipelineOptions {
  std::size_t n = kDefaultKeyLength;       // type-table key length + 1
  std::size_t type_k = kDefaultTopTypes;   // categories shown in stage-1 sentences
  std::size_t window = kMaxHistory;        // history length
  std::size_t k = 5;                       // predictions collected per case
  std::size_t attempt_cap_factor = 4;      // stage-2 candidate cap = factor * k
  std::size_t max_poi = 3;
  std::int64_t utc_offset_seconds = 0;
  AblationFlags flags;
  TemplateSet templates = TemplateSet::canonical();
  std::size_t workers = 1;

  void validate() const {
    if (n < 2) throw ConfigError("n must be >= 2");
    if (type_k < 1 || k < 1 || window < 1 || attempt_cap_factor < 1 || max_poi < 1) {
      throw ConfigError("k, type_k, window, attempt cap and max_poi must be positive");
    }
    if (window > kMaxHistory) throw ConfigError("window must be <= 15");
    if (!flags.valid()) throw ConfigError("ablation flags disable every context source");
  }
};

// Named rows of the ablation matrix; the first row is the full model.
inline std::vector<std::pair<std::string, AblationFlags>> ablation_rows() {
  AblationFlags full;
  AblationFlags no_stage1 = full;
  no_stage1.use_stage1 = false;
  AblationFlags no_seq = full;
  no_seq.use_app_history = false;
  AblationFlags no_installed = full;
  no_installed.use_installed_apps = false;
  AblationFlags no_optional = full;
  no_optional.use_optional_context = false;
  return {{"full", full},
          {"w/o 1st stage training", no_stage1},
          {"w/o App seq info", no_seq},
          {"w/o installed App", no_installed},
          {"w/o optional contexts", no_optional}};
}

// The user's distinct training apps, grouped by category, ids ascending.
inline InstalledApps installed_apps_of(const SplitCorpus& corpus, const UserSplit& user) {
  std::map<std::string, std::set<AppId>> grouped;
  for (const auto& r : user.train) grouped[corpus.vocab.category_name(r.category_id)].insert(r.app_id);
  InstalledApps out;
  for (auto& [cat, apps] : grouped) out.emplace(cat, std::vector<AppId>(apps.begin(), apps.end()));
  return out;
}

// Context for predicting stream[pos] from the records before it.
inline ContextBundle make_bundle(const SplitCorpus& corpus, std::span<const UsageRecord> stream,
                                 std::size_t pos, const InstalledApps& installed,
                                 const PipelineOptions& opts) {
  ContextBundle b;
  const std::size_t begin = pos > opts.window ? pos - opts.window : 0;
  for (std::size_t i = begin; i < pos; ++i) {
    b.app_history.push_back(stream[i].app_id);
    b.category_history.push_back(corpus.vocab.category_name(stream[i].category_id));
  }
  b.time = clock::local_time(stream[pos].timestamp, opts.utc_offset_seconds);
  // Most recent distinct place labels, presented oldest first.
  std::vector<std::string> places;
  for (std::size_t i = pos; i > begin && places.size() < opts.max_poi; --i) {
    const auto& labels = stream[i - 1].poi_labels;
    if (!labels) continue;
    for (auto it = labels->rbegin(); it != labels->rend() && places.size() < opts.max_poi; ++it) {
      if (std::find(places.begin(), places.end(), *it) == places.end()) places.push_back(*it);
    }
  }
  if (!places.empty()) {
    std::reverse(places.begin(), places.end());
    b.poi_labels = std::move(places);
  }
  b.installed_apps = installed;
  return b;
}

inline PromptSentence stage1_sentence_for(const TypeTable& table, const ContextBundle& b) {
  const auto& dist = b.category_history.empty() ? table.global()
                                                : lookup_with_backoff(table, b.category_history);
  return templater::render_type_result(renderable(dist));
}

inline PromptSentence stage2_input(const ContextBundle& b, const PromptSentence& stage1,
                                   const PipelineOptions& opts) {
  auto ctx = templater::render_context(b, Stage::kNextApp, opts.flags, opts.templates);
  if (opts.flags.use_stage1) ctx = templater::with_stage1_result(std::move(ctx), stage1);
  return ctx;
}

// One pair per training position with a non-empty history: the rendered
// category context and the type-table sentence for its category key.
inline std::vector<TrainingPair> build_stage1_pairs(std::span<const SplitCorpus> corpora,
                                                    const TypeTable& table,
                                                    const PipelineOptions& opts) {
  std::vector<TrainingPair> pairs;
  for (const auto& corpus : corpora) {
    for (const auto& user : corpus.users) {
      for (std::size_t pos = 1; pos < user.train.size(); ++pos) {
        const auto b = make_bundle(corpus, user.train, pos, {}, opts);
        pairs.push_back({templater::render_context(b, Stage::kAppType, opts.flags, opts.templates),
                         stage1_sentence_for(table, b)});
      }
    }
  }
  return pairs;
}

// Stage-2 pairs for one dataset: app context, installed apps, time, places
// and the gold stage-1 sentence, targeting the next app.
inline std::vector<TrainingPair> build_stage2_pairs(const SplitCorpus& corpus,
                                                    const TypeTable& table,
                                                    const PipelineOptions& opts) {
  std::vector<TrainingPair> pairs;
  for (const auto& user : corpus.users) {
    const auto installed = installed_apps_of(corpus, user);
    for (std::size_t pos = 1; pos < user.train.size(); ++pos) {
      const auto b = make_bundle(corpus, user.train, pos, installed, opts);
      pairs.push_back({stage2_input(b, stage1_sentence_for(table, b), opts),
                       templater::render_target(user.train[pos].app_id)});
    }
  }
  return pairs;
}

struct TestCase {
  std::uint64_t id = 0;
  std::string dataset_id;
  std::string user_id;
  ContextBundle bundle;
  AppId truth = 0;
};

// Every test record of every user, with history drawn from the full stream.
inline std::vector<TestCase> build_test_cases(const SplitCorpus& corpus,
                                              const PipelineOptions& opts) {
  std::vector<TestCase> cases;
  for (const auto& user : corpus.users) {
    const auto installed = installed_apps_of(corpus, user);
    const auto stream = full_stream(user);
    const std::size_t first = user.train.size() + user.validation.size();
    for (std::size_t pos = first; pos < stream.size(); ++pos) {
      cases.push_back({cases.size(), corpus.dataset_id, user.user_id,
                       make_bundle(corpus, stream, pos, installed, opts), stream[pos].app_id});
    }
  }
  return cases;
}

struct ScoredApp {
  AppId app = 0;
  double score = 0.0;

  bool operator==(const ScoredApp&) const = default;
};

struct RankedPrediction {
  std::uint64_t test_case_id = 0;
  std::vector<ScoredApp> apps;  // distinct, best first
  std::size_t attempts_used = 0;
  bool stage1_fallback = false;

  std::vector<AppId> ids() const {
    std::vector<AppId> out;
    for (const auto& a : apps) out.push_back(a.app);
    return out;
  }
  bool operator==(const RankedPrediction&) const = default;
};

struct Backends {
  Predictor* stage1 = nullptr;  // may be null when stage 1 is disabled
  Predictor* stage2 = nullptr;
};

// Runs stage 1 (if enabled) then asks stage 2 for growing candidate batches
// until k distinct parseable apps are collected or the attempt cap is hit.
inline RankedPrediction predict_case(const TestCase& tc, const Backends& backends,
                                     const TypeTable& table, const PipelineOptions& opts) {
  if (!backends.stage2) throw ConfigError("no stage-2 backend");
  RankedPrediction out;
  out.test_case_id = tc.id;

  PromptSentence stage1;
  if (opts.flags.use_stage1) {
    std::optional<TypeDistribution> dist;
    if (backends.stage1) {
      const auto prompt =
          templater::render_context(tc.bundle, Stage::kAppType, opts.flags, opts.templates);
      const auto cands = backends.stage1->generate({tc.id, prompt.text, 1, Stage::kAppType});
      if (!cands.empty()) dist = templater::parse_type_result(cands.front().text);
    }
    if (dist) {
      stage1 = templater::render_type_result(*dist);
    } else {
      stage1 = stage1_sentence_for(table, tc.bundle);
      out.stage1_fallback = true;
    }
  }
  const auto prompt = stage2_input(tc.bundle, stage1, opts);

  const std::size_t cap = opts.attempt_cap_factor * opts.k;
  std::size_t batch = std::min(opts.k, cap);
  std::set<AppId> seen;
  while (true) {
    // Canonical order, so in-process and remote backends rank ties alike.
    auto cands = backends.stage2->generate({tc.id, prompt.text, batch, Stage::kNextApp});
    sort_candidates(cands);
    out.attempts_used = batch;
    for (const auto& c : cands) {
      if (out.apps.size() >= opts.k) break;
      const auto app = templater::parse_prediction(c.text);
      if (!app || !seen.insert(*app).second) continue;
      out.apps.push_back({*app, c.score});
    }
    if (out.apps.size() >= opts.k || cands.size() < batch || batch >= cap) break;
    batch = std::min(batch * 2, cap);
  }
  return out;
}

inline std::vector<RankedPrediction> predict_all(std::span<const TestCase> cases,
                                                 const Backends& backends, const TypeTable& table,
                                                 const PipelineOptions& opts) {
  return parallel_map(
      cases, [&](const TestCase& tc) { return predict_case(tc, backends, table, opts); },
      opts.workers);
}

struct ReferenceModels {
  ReferenceBackend stage1;
  std::map<std::string, ReferenceBackend> stage2;  // per dataset id
};

// Stage 1 is fitted jointly over every dataset (shared category space);
// stage 2 per dataset, since app ids are dataset-local.
inline ReferenceModels fit_reference_models(std::span<const SplitCorpus> corpora,
                                            const TypeTable& table, const PipelineOptions& opts,
                                            const ReferenceOptions& ref = {}) {
  ReferenceOptions ro = ref;
  ro.templates = opts.templates;
  ReferenceModels models;
  models.stage1 = ReferenceBackend::fit(build_stage1_pairs(corpora, table, opts), Stage::kAppType, ro);
  for (const auto& c : corpora) {
    models.stage2.emplace(c.dataset_id,
                          ReferenceBackend::fit(build_stage2_pairs(c, table, opts), Stage::kNextApp, ro));
  }
  return models;
}

}  // namespace nextapp
