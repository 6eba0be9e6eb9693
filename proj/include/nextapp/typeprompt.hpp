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

// Next-category distributions over category-sequence keys, aggregated over
// every user of every dataset, and their rendering as stage-1 targets.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nextapp/corpus.hpp"
#include "nextapp/error.hpp"
#include "nextapp/parallel.hpp"
#include "nextapp/templater.hpp"
#include "nextapp/type_distribution.hpp"

namespace nextapp {

using CategoryKey = std::vector<std::string>;
using CategoryCounts = std::map<std::string, std::uint64_t>;

inline constexpr std::size_t kDefaultKeyLength = 3;  // n: key holds n-1 categories
inline constexpr std::size_t kDefaultTopTypes = 3;

// Integer percentages for the shown entries of a distribution with the given
// counts out of `total`. Each entry is rounded half up; if the shown entries
// then exceed 100, the entries that gained the most from rounding are
// decremented (ties: the lower-ranked entry). Counts must be non-increasing.
inline std::vector<int> round_percents(std::span<const std::uint64_t> counts, std::uint64_t total) {
  std::vector<int> pct(counts.size());
  // Rounding gain scaled by `total`: pct*total - 100*count.
  std::vector<std::int64_t> gain(counts.size());
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::uint64_t num = 200 * counts[i] + total;
    pct[i] = static_cast<int>(num / (2 * total));
    gain[i] = static_cast<std::int64_t>(pct[i]) * static_cast<std::int64_t>(total) -
              100 * static_cast<std::int64_t>(counts[i]);
    sum += pct[i];
  }
  std::vector<bool> lowered(counts.size(), false);
  while (sum > 100) {
    std::size_t best = counts.size();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (lowered[i] || gain[i] <= 0) continue;
      if (best == counts.size() || gain[i] >= gain[best]) best = i;
    }
    if (best == counts.size()) break;
    lowered[best] = true;
    --pct[best];
    --sum;
  }
  return pct;
}

// Builds a ranked distribution from raw counts: probability descending, ties
// by category name, truncated to the top `k`.
inline TypeDistribution distribution_from_counts(CategoryKey key, const CategoryCounts& counts,
                                                 std::size_t k) {
  TypeDistribution dist;
  dist.key = std::move(key);
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  for (const auto& [_, c] : ranked) dist.support_count += c;
  if (dist.support_count == 0) return dist;
  // std::map iteration is already name-ascending, so a stable sort on count
  // leaves ties in name order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > k) ranked.resize(k);
  std::vector<std::uint64_t> shown;
  for (const auto& [_, c] : ranked) shown.push_back(c);
  const auto pct = round_percents(shown, dist.support_count);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    dist.entries.push_back({ranked[i].first,
                            static_cast<double>(ranked[i].second) /
                                static_cast<double>(dist.support_count),
                            pct[i]});
  }
  return dist;
}

// The sentence form drops entries whose rounded share is 0%.
inline TypeDistribution renderable(TypeDistribution dist) {
  std::erase_if(dist.entries, [](const auto& e) { return e.percent <= 0; });
  return dist;
}

class TypeTable {
 public:
  TypeTable() = default;
  TypeTable(std::size_t n, std::size_t k) : n_(n), k_(k), counts_(n > 0 ? n - 1 : 0) {}

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }

  // Keys of length n-1 (the table proper), in key order.
  const std::map<CategoryKey, TypeDistribution>& entries() const { return dists_full_; }

  // Distribution for an exact key of any length 1..n-1, if observed.
  const TypeDistribution* find(const CategoryKey& key) const {
    if (key.empty() || key.size() >= n_) return nullptr;
    const auto& level = dists_[key.size() - 1];
    const auto it = level.find(key);
    return it == level.end() ? nullptr : &it->second;
  }

  const TypeDistribution& global() const { return global_; }

  const std::map<CategoryKey, CategoryCounts>& counts(std::size_t key_length) const {
    return counts_.at(key_length - 1);
  }
  const CategoryCounts& global_counts() const { return global_counts_; }

  bool empty() const { return global_counts_.empty(); }

  // Adds all observations from one category stream (one user's training records).
  void add_stream(std::span<const std::string> stream) {
    for (const auto& c : stream) ++global_counts_[c];
    for (std::size_t len = 1; len < n_; ++len) {
      auto& level = counts_[len - 1];
      for (std::size_t i = len; i < stream.size(); ++i) {
        CategoryKey key(stream.begin() + static_cast<std::ptrdiff_t>(i - len),
                        stream.begin() + static_cast<std::ptrdiff_t>(i));
        ++level[std::move(key)][stream[i]];
      }
    }
  }

  void merge(const TypeTable& other) {
    for (const auto& [c, v] : other.global_counts_) global_counts_[c] += v;
    for (std::size_t l = 0; l < counts_.size(); ++l) {
      for (const auto& [key, cc] : other.counts_[l]) {
        auto& dst = counts_[l][key];
        for (const auto& [c, v] : cc) dst[c] += v;
      }
    }
  }

  void restore_key(const CategoryKey& key, const CategoryCounts& counts) {
    counts_.at(key.size() - 1)[key] = counts;
  }
  void restore_global(const CategoryCounts& counts) { global_counts_ = counts; }

  // Recomputes ranked distributions from counts.
  void finalize() {
    dists_.assign(counts_.size(), {});
    for (std::size_t l = 0; l < counts_.size(); ++l) {
      for (const auto& [key, cc] : counts_[l]) {
        dists_[l].emplace(key, distribution_from_counts(key, cc, k_));
      }
    }
    dists_full_ = dists_.empty() ? std::map<CategoryKey, TypeDistribution>{} : dists_.back();
    global_ = distribution_from_counts({}, global_counts_, k_);
  }

  bool operator==(const TypeTable& o) const {
    return n_ == o.n_ && k_ == o.k_ && counts_ == o.counts_ && global_counts_ == o.global_counts_;
  }

 private:
  std::size_t n_ = kDefaultKeyLength;
  std::size_t k_ = kDefaultTopTypes;
  std::vector<std::map<CategoryKey, CategoryCounts>> counts_;  // index: key length - 1
  CategoryCounts global_counts_;
  std::vector<std::map<CategoryKey, TypeDistribution>> dists_;
  std::map<CategoryKey, TypeDistribution> dists_full_;
  TypeDistribution global_;
};

// Category-name stream of one user's training records.
inline std::vector<std::string> category_stream(const SplitCorpus& corpus, const UserSplit& user) {
  std::vector<std::string> out;
  out.reserve(user.train.size());
  for (const auto& r : user.train) out.push_back(corpus.vocab.category_name(r.category_id));
  return out;
}

inline TypeTable build_type_table_from_streams(std::span<const std::vector<std::string>> streams,
                                               std::size_t n, std::size_t k,
                                               std::size_t workers = 1) {
  if (n < 2) throw ConfigError("type table key length n must be >= 2");
  if (k < 1) throw ConfigError("type table top count k must be >= 1");
  auto partials = parallel_map(
      streams,
      [&](const std::vector<std::string>& s) {
        TypeTable t(n, k);
        t.add_stream(s);
        return t;
      },
      workers);
  TypeTable table(n, k);
  for (const auto& p : partials) table.merge(p);
  table.finalize();
  return table;
}

// Counts next-category occurrences after every length n-1 category sequence
// in the training split of every user of every dataset.
inline TypeTable build_type_table(std::span<const SplitCorpus> datasets, std::size_t n,
                                  std::size_t k, std::size_t workers = 1) {
  std::vector<std::vector<std::string>> streams;
  for (const auto& d : datasets) {
    for (const auto& u : d.users) streams.push_back(category_stream(d, u));
  }
  return build_type_table_from_streams(streams, n, k, workers);
}

// Longest observed suffix of the history (up to n-1 categories), falling
// back to the global category marginal.
inline const TypeDistribution& lookup_with_backoff(const TypeTable& table,
                                                   std::span<const std::string> history) {
  if (history.empty()) throw ConfigError("lookup_with_backoff needs a non-empty history");
  const std::size_t max_len = std::min(history.size(), table.n() - 1);
  for (std::size_t len = max_len; len >= 1; --len) {
    const CategoryKey key(history.end() - static_cast<std::ptrdiff_t>(len), history.end());
    if (const auto* d = table.find(key)) return *d;
  }
  return table.global();
}

// One stage-1 target sentence per key of the table.
inline std::vector<std::pair<CategoryKey, PromptSentence>> emit_stage1_targets(
    const TypeTable& table) {
  std::vector<std::pair<CategoryKey, PromptSentence>> out;
  for (const auto& [key, dist] : table.entries()) {
    out.emplace_back(key, templater::render_type_result(renderable(dist)));
  }
  return out;
}

inline std::vector<std::pair<CategoryKey, PromptSentence>> emit_stage1_targets(
    std::span<const SplitCorpus> datasets, std::size_t n, std::size_t k) {
  return emit_stage1_targets(build_type_table(datasets, n, k));
}

// Line-delimited JSON: a header line, then one line per key (all key lengths,
// shortest first, key order within a length), then the global marginal.
inline void save_type_table(std::ostream& out, const TypeTable& table,
                            const std::string& config_hash) {
  out << nlohmann::json{{"kind", "type_table"}, {"n", table.n()}, {"k", table.k()},
                        {"config_hash", config_hash}}
             .dump()
      << '\n';
  const auto line = [&](const CategoryKey& key, const CategoryCounts& counts,
                        const TypeDistribution& dist) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : dist.entries) {
      entries.push_back({{"category", e.category}, {"probability", e.probability},
                         {"percent", e.percent}});
    }
    out << nlohmann::json{{"key", key}, {"support", dist.support_count}, {"counts", counts},
                          {"entries", entries}}
               .dump()
        << '\n';
  };
  for (std::size_t len = 1; len < table.n(); ++len) {
    for (const auto& [key, counts] : table.counts(len)) line(key, counts, *table.find(key));
  }
  line({}, table.global_counts(), table.global());
}

inline TypeTable load_type_table(std::istream& in, std::string* config_hash = nullptr) {
  std::string line;
  if (!std::getline(in, line)) throw ArtifactError("type table file is empty");
  const auto header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("kind", "") != "type_table") {
    throw ArtifactError("not a type table file");
  }
  if (config_hash) *config_hash = header.value("config_hash", "");
  TypeTable table(header.at("n").get<std::size_t>(), header.at("k").get<std::size_t>());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ArtifactError("malformed type table line");
    const auto key = j.at("key").get<CategoryKey>();
    const auto counts = j.at("counts").get<CategoryCounts>();
    if (key.empty()) {
      table.restore_global(counts);
    } else {
      if (key.size() >= table.n()) throw ArtifactError("type table key longer than n-1");
      table.restore_key(key, counts);
    }
  }
  table.finalize();
  return table;
}

}  // namespace nextapp
