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

// Accuracy@k / MRR@k, MFU and MRU baselines, and report rendering.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nextapp/corpus.hpp"
#include "nextapp/error.hpp"
#include "nextapp/pipeline.hpp"

namespace nextapp {

namespace eval_detail {

inline void check_aligned(std::size_t predictions, std::size_t truths, std::size_t k) {
  if (predictions != truths) throw ConfigError("predictions and truths are not aligned");
  if (truths == 0) throw ConfigError("empty test set");
  if (k < 1) throw ConfigError("k must be >= 1");
}

// 1-based rank of `truth` within the first k entries, 0 if absent.
inline std::size_t rank_within(std::span<const AppId> ranked, AppId truth, std::size_t k) {
  const std::size_t limit = std::min(k, ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranked[i] == truth) return i + 1;
  }
  return 0;
}

}  // namespace eval_detail

// Fraction of cases whose truth appears among the top k predictions.
inline double accuracy_at_k(std::span<const std::vector<AppId>> predictions,
                            std::span<const AppId> truths, std::size_t k) {
  eval_detail::check_aligned(predictions.size(), truths.size(), k);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (eval_detail::rank_within(predictions[i], truths[i], k) > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truths.size());
}

// Mean reciprocal rank, counting ranks beyond k (or absent) as 0.
inline double mrr_at_k(std::span<const std::vector<AppId>> predictions,
                       std::span<const AppId> truths, std::size_t k) {
  eval_detail::check_aligned(predictions.size(), truths.size(), k);
  double sum = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const auto r = eval_detail::rank_within(predictions[i], truths[i], k);
    if (r > 0) sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(truths.size());
}

// Apps by frequency descending, ties by app id.
inline std::vector<AppId> mfu_ranking(std::span<const AppId> history, std::size_t k) {
  std::map<AppId, std::size_t> freq;
  for (auto a : history) ++freq[a];
  std::vector<std::pair<AppId, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<AppId> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

// Distinct apps by recency of last use, most recent first.
inline std::vector<AppId> mru_ranking(std::span<const AppId> history, std::size_t k) {
  std::vector<AppId> out;
  for (auto it = history.rbegin(); it != history.rend() && out.size() < k; ++it) {
    if (std::find(out.begin(), out.end(), *it) == out.end()) out.push_back(*it);
  }
  return out;
}

// MFU over each user's training split; one prediction per test record, in
// build_test_cases order.
inline std::vector<std::vector<AppId>> baseline_mfu(const SplitCorpus& corpus, std::size_t k) {
  std::vector<std::vector<AppId>> out;
  for (const auto& u : corpus.users) {
    std::vector<AppId> train;
    for (const auto& r : u.train) train.push_back(r.app_id);
    const auto ranking = mfu_ranking(train, k);
    out.insert(out.end(), u.test.size(), ranking);
  }
  return out;
}

// MRU over the true stream strictly before each test record, including
// earlier test records.
inline std::vector<std::vector<AppId>> baseline_mru(const SplitCorpus& corpus, std::size_t k) {
  std::vector<std::vector<AppId>> out;
  for (const auto& u : corpus.users) {
    std::vector<AppId> stream;
    for (const auto& r : full_stream(u)) stream.push_back(r.app_id);
    const std::size_t first = u.train.size() + u.validation.size();
    for (std::size_t pos = first; pos < stream.size(); ++pos) {
      out.push_back(mru_ranking(std::span<const AppId>(stream.data(), pos), k));
    }
  }
  return out;
}

inline std::vector<AppId> test_truths(const SplitCorpus& corpus) {
  std::vector<AppId> out;
  for (const auto& u : corpus.users) {
    for (const auto& r : u.test) out.push_back(r.app_id);
  }
  return out;
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"A@1", "A@3", "A@5", "MRR@3", "MRR@5"};
  return names;
}

struct EvalReport {
  std::string model;
  std::string dataset;
  std::string configuration = "full";
  AblationFlags flags;
  std::size_t cases = 0;
  std::map<std::string, double> metrics;
  double elapsed_seconds = 0.0;  // kept out of the serialized report

  // A@1 <= A@3 <= A@5 and A@1 <= MRR@k <= A@k.
  bool ordering_holds() const {
    constexpr double eps = 1e-12;
    const auto m = [&](const char* name) { return metrics.at(name); };
    return m("A@1") <= m("A@3") + eps && m("A@3") <= m("A@5") + eps &&
           m("A@1") <= m("MRR@3") + eps && m("MRR@3") <= m("A@3") + eps &&
           m("A@1") <= m("MRR@5") + eps && m("MRR@5") <= m("A@5") + eps &&
           m("MRR@3") <= m("MRR@5") + eps;
  }
};

inline EvalReport make_report(std::string model, std::string dataset,
                              std::span<const std::vector<AppId>> predictions,
                              std::span<const AppId> truths) {
  EvalReport r;
  r.model = std::move(model);
  r.dataset = std::move(dataset);
  r.cases = truths.size();
  r.metrics["A@1"] = accuracy_at_k(predictions, truths, 1);
  r.metrics["A@3"] = accuracy_at_k(predictions, truths, 3);
  r.metrics["A@5"] = accuracy_at_k(predictions, truths, 5);
  r.metrics["MRR@3"] = mrr_at_k(predictions, truths, 3);
  r.metrics["MRR@5"] = mrr_at_k(predictions, truths, 5);
  if (!r.ordering_holds()) throw Error("metric ordering invariant violated for " + r.model);
  return r;
}

inline nlohmann::json flags_json(const AblationFlags& f) {
  return {{"use_stage1", f.use_stage1},
          {"use_app_history", f.use_app_history},
          {"use_installed_apps", f.use_installed_apps},
          {"use_optional_context", f.use_optional_context}};
}

inline nlohmann::json report_json(const EvalReport& r, const std::string& config_hash) {
  return {{"model", r.model},   {"dataset", r.dataset},          {"configuration", r.configuration},
          {"flags", flags_json(r.flags)}, {"cases", r.cases}, {"metrics", r.metrics},
          {"config_hash", config_hash}};
}

inline void write_reports_jsonl(std::ostream& out, std::span<const EvalReport> reports,
                                const std::string& config_hash) {
  for (const auto& r : reports) out << report_json(r, config_hash).dump() << '\n';
}

// Model rows x metric columns.
inline std::string format_table(std::span<const EvalReport> reports) {
  std::size_t width = 5;
  for (const auto& r : reports) width = std::max(width, r.model.size());
  std::ostringstream os;
  const auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  os << pad("Model") << " | Dataset";
  std::size_t dwidth = 7;
  for (const auto& r : reports) dwidth = std::max(dwidth, r.dataset.size());
  os << std::string(dwidth - 7, ' ');
  for (const char* h : {"A@1", "A@3", "A@5", "M@3", "M@5"}) os << " | " << h << "   ";
  os << '\n' << std::string(width, '-') << "-|-" << std::string(dwidth, '-');
  for (int i = 0; i < 5; ++i) os << "-|-------";
  os << '\n';
  for (const auto& r : reports) {
    os << pad(r.model) << " | " << r.dataset << std::string(dwidth - r.dataset.size(), ' ');
    for (const auto& name : metric_names()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", r.metrics.at(name));
      os << " | " << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace nextapp
