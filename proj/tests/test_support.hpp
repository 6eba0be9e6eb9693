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

// Test-only helpers: corpus builders and independent oracles. Nothing here
// calls the library routine it is used to check.

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nextapp.hpp"

namespace nextapp::testing {

// Builds a SplitCorpus directly from per-user app sequences. Timestamps are
// one minute apart; the category of app a is categories[a % categories.size()].
inline SplitCorpus corpus_from_sequences(const std::string& dataset_id,
                                         const std::vector<std::pair<std::string, std::vector<int>>>& users,
                                         const std::vector<std::string>& categories = {"Communication", "Social", "Travel"}) {
  Vocab vocab;
  std::vector<UsageRecord> records;
  for (const auto& [user, apps] : users) {
    Timestamp t = 1'700'000'000;
    for (int a : apps) {
      const auto cat = categories[static_cast<std::size_t>(a) % categories.size()];
      const AppId id = *vocab.intern_app("app" + std::to_string(a), cat);
      records.push_back({user, t, id, vocab.category_of(id), std::nullopt});
      t += 60;
    }
  }
  return preprocess(dataset_id, std::move(vocab), records);
}

inline SplitCorpus synthetic_corpus(const synthetic::MarkovSpec& spec,
                                    const std::string& dataset_id = "synthetic") {
  std::istringstream in(synthetic::markov_log(spec));
  LogFormat fmt;
  fmt.poi_column = "poi";
  Vocab vocab;
  auto parsed = parse_log(in, fmt, vocab);
  return preprocess(dataset_id, std::move(vocab), parsed.records);
}

// Brute force: for every key g seen in any training stream,
// rescan every user of every dataset for occurrences of g and count the
// category that follows. Returns key -> (category -> count).
inline std::map<std::vector<std::string>, std::map<std::string, std::uint64_t>> brute_force_counts(
    const std::vector<SplitCorpus>& datasets, std::size_t n) {
  std::vector<std::vector<std::string>> streams;
  for (const auto& d : datasets) {
    for (const auto& u : d.users) {
      std::vector<std::string> s;
      for (const auto& r : u.train) s.push_back(d.vocab.category_name(r.category_id));
      streams.push_back(std::move(s));
    }
  }
  const std::size_t len = n - 1;
  std::vector<std::vector<std::string>> keys;
  for (const auto& s : streams) {
    for (std::size_t i = 0; i + len < s.size(); ++i) {
      keys.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(i),
                        s.begin() + static_cast<std::ptrdiff_t>(i + len));
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  std::map<std::vector<std::string>, std::map<std::string, std::uint64_t>> out;
  for (const auto& g : keys) {
    auto& counts = out[g];
    for (const auto& s : streams) {
      for (std::size_t i = 0; i + len < s.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < len && match; ++j) match = s[i + j] == g[j];
        if (match) ++counts[s[i + len]];
      }
    }
  }
  return out;
}

struct OracleEntry {
  std::string category;
  double probability;
};

// Top-k of a count map: probability descending, ties by name ascending.
inline std::vector<OracleEntry> oracle_top_k(const std::map<std::string, std::uint64_t>& counts,
                                             std::size_t k) {
  std::uint64_t total = 0;
  for (const auto& [_, c] : counts) total += c;
  std::vector<OracleEntry> all;
  for (const auto& [cat, c] : counts) {
    all.push_back({cat, static_cast<double>(c) / static_cast<double>(total)});
  }
  // Selection by repeated maximum scan.
  std::vector<OracleEntry> out;
  std::vector<bool> used(all.size(), false);
  for (std::size_t r = 0; r < k && r < all.size(); ++r) {
    std::size_t best = all.size();
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (used[i]) continue;
      if (best == all.size() || all[i].probability > all[best].probability ||
          (all[i].probability == all[best].probability && all[i].category < all[best].category)) {
        best = i;
      }
    }
    used[best] = true;
    out.push_back(all[best]);
  }
  return out;
}

// Naive metric oracles.
inline double oracle_accuracy(const std::vector<std::vector<AppId>>& preds,
                              const std::vector<AppId>& truths, std::size_t k) {
  double hits = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    bool hit = false;
    for (std::size_t j = 0; j < preds[i].size(); ++j) {
      if (j < k && preds[i][j] == truths[i]) hit = true;
    }
    hits += hit ? 1 : 0;
  }
  return hits / static_cast<double>(truths.size());
}

inline double oracle_mrr(const std::vector<std::vector<AppId>>& preds,
                         const std::vector<AppId>& truths, std::size_t k) {
  double sum = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    for (std::size_t j = 0; j < preds[i].size(); ++j) {
      if (preds[i][j] == truths[i]) {
        if (j + 1 <= k) sum += 1.0 / static_cast<double>(j + 1);
        break;
      }
    }
  }
  return sum / static_cast<double>(truths.size());
}

// Predictor that replays a fixed candidate list for every request.
class FixedPredictor final : public Predictor {
 public:
  explicit FixedPredictor(std::vector<std::string> texts) : texts_(std::move(texts)) {}
  std::vector<Candidate> generate(const GenerationRequest& r) override {
    ++calls;
    last_prompt = r.prompt;
    std::vector<Candidate> out;
    for (std::size_t i = 0; i < texts_.size() && i < r.num_candidates; ++i) {
      out.push_back({texts_[i], 1.0 - 0.01 * static_cast<double>(i)});
    }
    return out;
  }
  std::string name() const override { return "fixed"; }

  int calls = 0;
  std::string last_prompt;

 private:
  std::vector<std::string> texts_;
};

}  // namespace nextapp::testing
