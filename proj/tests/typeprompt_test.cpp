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


#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "nextapp.hpp"
#include "test_support.hpp"

namespace nextapp {
namespace {

using testing::brute_force_counts;
using testing::corpus_from_sequences;
using testing::oracle_top_k;

TypeTable table_of(const std::vector<std::vector<std::string>>& streams, std::size_t n, std::size_t k) {
  return build_type_table_from_streams(streams, n, k);
}

TEST(TypeTable, CertainFollowerGivesFullShare) {
  const auto t = table_of({{"Comm", "Social", "Comm", "Social", "Comm"}}, 3, 3);
  const auto* d = t.find({"Comm", "Social"});
  ASSERT_TRUE(d);
  ASSERT_EQ(d->entries.size(), 1u);
  EXPECT_EQ(d->entries[0].category, "Comm");
  EXPECT_EQ(d->entries[0].probability, 1.0);
  EXPECT_EQ(d->entries[0].percent, 100);
}

TEST(TypeTable, CountsAggregateAcrossUsers) {
  // (A,B) is followed by C three times and D once over two users.
  const std::vector<std::vector<std::string>> streams = {{"A", "B", "C", "A", "B", "C"},
                                                         {"A", "B", "D", "X", "A", "B", "C"}};
  const auto t = table_of(streams, 3, 3);
  const auto* d = t.find({"A", "B"});
  ASSERT_TRUE(d);
  ASSERT_EQ(d->entries.size(), 2u);
  EXPECT_EQ(d->entries[0].category, "C");
  EXPECT_EQ(d->entries[0].probability, 0.75);
  EXPECT_EQ(d->entries[0].percent, 75);
  EXPECT_EQ(d->entries[1].category, "D");
  EXPECT_EQ(d->entries[1].percent, 25);
  EXPECT_EQ(d->support_count, 4u);

  const auto t1 = table_of(streams, 3, 1);
  const auto* top1 = t1.find({"A", "B"});
  ASSERT_EQ(top1->entries.size(), 1u);
  EXPECT_EQ(top1->entries[0].category, "C");
  EXPECT_EQ(top1->entries[0].percent, 75);
}

TEST(TypeTable, TiesBreakByName) {
  const auto t = table_of({{"K", "b", "K", "a", "K", "c"}}, 2, 2);
  const auto* d = t.find({"K"});
  ASSERT_EQ(d->entries.size(), 2u);
  EXPECT_EQ(d->entries[0].category, "a");
  EXPECT_EQ(d->entries[1].category, "b");
}

TEST(TypeTable, RejectsBadParameters) {
  EXPECT_THROW(table_of({{"a"}}, 1, 3), ConfigError);
  EXPECT_THROW(table_of({{"a"}}, 3, 0), ConfigError);
  EXPECT_TRUE(table_of({}, 3, 3).empty());
}

TEST(TypeTable, MatchesBruteForceRecount) {
  for (std::uint64_t seed : {1, 2, 3}) {
    synthetic::MarkovSpec spec;
    spec.users = 15;
    spec.events_per_user = 120;
    spec.seed = seed;
    const std::vector<SplitCorpus> data = {testing::synthetic_corpus(spec, "a")};
    for (std::size_t n : {2, 3, 4}) {
      for (std::size_t k : {1, 3}) {
        const auto table = build_type_table(data, n, k);
        const auto oracle = brute_force_counts(data, n);
        ASSERT_EQ(table.counts(n - 1), oracle);
        ASSERT_EQ(table.entries().size(), oracle.size());
        for (const auto& [key, counts] : oracle) {
          const auto expected = oracle_top_k(counts, k);
          const auto& got = table.entries().at(key).entries;
          ASSERT_EQ(got.size(), expected.size());
          for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].category, expected[i].category);
            EXPECT_EQ(got[i].probability, expected[i].probability);
          }
        }
      }
    }
  }
}

TEST(TypeTable, WorkerCountDoesNotChangeTheTable) {
  synthetic::MarkovSpec spec;
  spec.users = 12;
  const std::vector<SplitCorpus> data = {testing::synthetic_corpus(spec)};
  EXPECT_EQ(build_type_table(data, 3, 3, 1), build_type_table(data, 3, 3, 4));
}

TEST(TypeTable, UnionIsMonotoneAndOrderFree) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> cats = {"a", "b", "c", "d"};
  std::vector<std::vector<std::string>> streams(10);
  for (auto& s : streams) {
    for (int i = 0; i < 30; ++i) s.push_back(cats[rng() % cats.size()]);
  }
  const auto whole = table_of(streams, 3, 3);
  const auto part = table_of({streams.begin(), streams.begin() + 5}, 3, 3);
  for (const auto& [key, counts] : part.counts(2)) {
    for (const auto& [c, v] : counts) EXPECT_GE(whole.counts(2).at(key).at(c), v);
  }
  auto shuffled = streams;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_EQ(table_of(shuffled, 3, 3), whole);
}

TEST(TypeTable, ProbabilitiesSumToOneBeforeTruncation) {
  synthetic::MarkovSpec spec;
  const std::vector<SplitCorpus> data = {testing::synthetic_corpus(spec)};
  const auto full = build_type_table(data, 3, 100);
  for (const auto& [key, d] : full.entries()) {
    double sum = 0;
    for (const auto& e : d.entries) sum += e.probability;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (std::size_t i = 1; i < d.entries.size(); ++i) {
      EXPECT_GE(d.entries[i - 1].probability, d.entries[i].probability);
    }
  }
}

TEST(RoundPercents, TwoThirdsOneThird) {
  const std::vector<std::uint64_t> c = {2, 1};
  EXPECT_EQ(round_percents(c, 3), (std::vector<int>{67, 33}));
  const std::vector<std::uint64_t> thirds = {1, 1, 1};
  EXPECT_EQ(round_percents(thirds, 3), (std::vector<int>{33, 33, 33}));
  const std::vector<std::uint64_t> halves = {1, 1};
  EXPECT_EQ(round_percents(halves, 2), (std::vector<int>{50, 50}));
}

TEST(RoundPercents, RandomDistributionsSatisfyRationalBounds) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng() % 8;
    std::vector<std::uint64_t> counts(m);
    for (auto& c : counts) c = 1 + rng() % 400;
    std::sort(counts.rbegin(), counts.rend());
    const std::uint64_t hidden = rng() % 2 ? rng() % 300 : 0;
    const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), hidden);
    const std::size_t shown = 1 + rng() % m;
    const std::span<const std::uint64_t> top(counts.data(), shown);
    const auto pct = round_percents(top, total);
    int sum = 0;
    for (std::size_t i = 0; i < shown; ++i) {
      // Exact share is 100 c / total; the rendered integer is within one of it.
      const std::int64_t scaled = static_cast<std::int64_t>(pct[i]) * static_cast<std::int64_t>(total);
      const std::int64_t exact = 100 * static_cast<std::int64_t>(top[i]);
      EXPECT_LT(std::abs(scaled - exact), static_cast<std::int64_t>(total));
      // Round half up, possibly lowered by one.
      const int half_up = static_cast<int>((200 * top[i] + total) / (2 * total));
      EXPECT_TRUE(pct[i] == half_up || pct[i] == half_up - 1);
      sum += pct[i];
    }
    EXPECT_LE(sum, 100);
    if (hidden == 0 && shown == m) EXPECT_GE(sum, 100 - static_cast<int>(m));
  }
}

TEST(RoundPercents, ZeroPercentEntriesAreDroppedFromSentences) {
  CategoryCounts counts = {{"a", 999}, {"b", 1}};
  const auto d = distribution_from_counts({"x"}, counts, 3);
  ASSERT_EQ(d.entries.size(), 2u);
  EXPECT_EQ(d.entries[1].percent, 0);
  EXPECT_EQ(templater::render_type_result(renderable(d)).text,
            "Based on the global information, the next app will be a a app (100%)");
}

TEST(Backoff, LongestSuffixThenGlobal) {
  const auto t = table_of({{"A", "B", "C", "A", "B", "D", "B", "C"}}, 3, 3);
  const std::vector<std::string> seen = {"A", "B"};
  EXPECT_EQ(&lookup_with_backoff(t, seen), t.find({"A", "B"}));
  const std::vector<std::string> suffix_only = {"C", "B"};
  EXPECT_EQ(&lookup_with_backoff(t, suffix_only), t.find({"B"}));
  const std::vector<std::string> unseen = {"Z"};
  const auto& g = lookup_with_backoff(t, unseen);
  EXPECT_EQ(&g, &t.global());
  // Global marginal by direct frequency: B 3, A 2, C 2, D 1.
  ASSERT_EQ(g.entries.size(), 3u);
  EXPECT_EQ(g.entries[0].category, "B");
  EXPECT_EQ(g.entries[0].probability, 3.0 / 8.0);
  EXPECT_EQ(g.entries[1].category, "A");
  EXPECT_EQ(g.entries[2].category, "C");
  const std::vector<std::string> longer = {"Q", "Q", "A", "B"};
  EXPECT_EQ(&lookup_with_backoff(t, longer), t.find({"A", "B"}));
  EXPECT_THROW(lookup_with_backoff(t, std::span<const std::string>{}), ConfigError);
}

TEST(Stage1Targets, OneSentencePerKey) {
  std::vector<std::vector<std::string>> streams;
  std::vector<std::string> s;
  const std::vector<std::pair<std::string, int>> followers = {{"communication", 7}, {"social", 2}, {"travel", 1}};
  for (const auto& [c, times] : followers) {
    for (int i = 0; i < times; ++i) {
      s.insert(s.end(), {"x", "y", c});
    }
  }
  streams.push_back(s);
  const auto t = table_of(streams, 3, 3);
  const auto targets = emit_stage1_targets(t);
  EXPECT_EQ(targets.size(), t.entries().size());
  const auto it = std::find_if(targets.begin(), targets.end(),
                               [](const auto& p) { return p.first == CategoryKey{"x", "y"}; });
  ASSERT_NE(it, targets.end());
  EXPECT_EQ(it->second.text,
            "Based on the global information, the next app will be a communication app (70%), "
            "social app (20%) or travel app (10%)");
}

TEST(Persistence, SaveLoadRoundTrip) {
  synthetic::MarkovSpec spec;
  const std::vector<SplitCorpus> data = {testing::synthetic_corpus(spec)};
  const auto t = build_type_table(data, 4, 3);
  std::stringstream buf;
  save_type_table(buf, t, "abc");
  std::string hash;
  const auto back = load_type_table(buf, &hash);
  EXPECT_EQ(hash, "abc");
  EXPECT_EQ(back, t);
  EXPECT_EQ(back.entries().size(), t.entries().size());
  for (const auto& [key, d] : t.entries()) EXPECT_TRUE(same_rendering(back.entries().at(key), d));
  std::istringstream junk("{\"kind\":\"other\"}\n");
  EXPECT_THROW(load_type_table(junk), ArtifactError);
}

TEST(TypeTable, UsesOnlyTrainingRecords) {
  // Categories only seen after the training split never reach the table.
  std::vector<int> apps(10, 0);
  apps[9] = 2;  // last record lands in the test split
  const auto c = corpus_from_sequences("d", {{"u", apps}}, {"Communication", "Social", "Travel"});
  const std::vector<SplitCorpus> data = {c};
  const auto t = build_type_table(data, 2, 3);
  EXPECT_FALSE(t.global_counts().contains("Travel"));
  EXPECT_EQ(t.global_counts().at("Communication"), 7u);
}

}  // namespace
}  // namespace nextapp
