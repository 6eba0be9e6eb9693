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

#include "nextapp.hpp"
#include "test_support.hpp"

namespace nextapp {
namespace {

using testing::FixedPredictor;

struct Fixture {
  std::vector<SplitCorpus> data;
  TypeTable table;
  PipelineOptions opts;

  explicit Fixture(PipelineOptions o = {}, std::size_t users = 6) : opts(o) {
    synthetic::MarkovSpec spec;
    spec.users = users;
    spec.events_per_user = 150;
    data.push_back(testing::synthetic_corpus(spec));
    table = build_type_table(data, opts.n, opts.type_k);
  }
};

std::size_t expected_pair_count(const SplitCorpus& c) {
  std::size_t n = 0;
  for (const auto& u : c.users) n += u.train.size() > 0 ? u.train.size() - 1 : 0;
  return n;
}

TEST(Pairs, CountsMatchEnumeration) {
  Fixture s;
  EXPECT_EQ(build_stage1_pairs(s.data, s.table, s.opts).size(), expected_pair_count(s.data[0]));
  EXPECT_EQ(build_stage2_pairs(s.data[0], s.table, s.opts).size(), expected_pair_count(s.data[0]));
}

TEST(Pairs, Stage1InputUsesCategoryNames) {
  const auto c = testing::corpus_from_sequences(
      "d", {{"u", {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2}}}, {"Photo/Video", "Communication", "Utilities"});
  const std::vector<SplitCorpus> data = {c};
  const auto table = build_type_table(data, 3, 3);
  const auto pairs = build_stage1_pairs(data, table, {});
  ASSERT_EQ(pairs.size(), 7u);
  EXPECT_TRUE(pairs[2].input.text.starts_with(
      "The apps Photo/Video, Communication, and Utilities are used prior to the prediction. On "))
      << pairs[2].input.text;
  EXPECT_TRUE(templater::parse_type_result(pairs[2].target.text));
}

TEST(Pairs, Stage2TargetsAndStage1Suffix) {
  Fixture s;
  const auto pairs = build_stage2_pairs(s.data[0], s.table, s.opts);
  std::size_t i = 0;
  for (const auto& u : s.data[0].users) {
    for (std::size_t pos = 1; pos < u.train.size(); ++pos, ++i) {
      EXPECT_EQ(pairs[i].target.text, templater::render_target(u.train[pos].app_id).text);
      const auto p = templater::parse_context(pairs[i].input.text, Stage::kNextApp);
      ASSERT_TRUE(p) << pairs[i].input.text;
      EXPECT_TRUE(p->stage1);
      EXPECT_TRUE(p->has_installed);
    }
  }
}

TEST(Pairs, AblationsChangeOnlyTheirComponent) {
  Fixture s;
  const auto full = build_stage2_pairs(s.data[0], s.table, s.opts);

  auto no_inst = s.opts;
  no_inst.flags.use_installed_apps = false;
  const auto a = build_stage2_pairs(s.data[0], s.table, no_inst);
  auto no_s1 = s.opts;
  no_s1.flags.use_stage1 = false;
  const auto b = build_stage2_pairs(s.data[0], s.table, no_s1);
  ASSERT_EQ(a.size(), full.size());
  ASSERT_EQ(b.size(), full.size());

  std::size_t i = 0;
  for (const auto& u : s.data[0].users) {
    const auto installed = templater::render_installed(installed_apps_of(s.data[0], u)).text;
    for (std::size_t pos = 1; pos < u.train.size(); ++pos, ++i) {
      auto expect = full[i].input.text;
      expect.erase(expect.find(installed + " "), installed.size() + 1);
      EXPECT_EQ(a[i].input.text, expect);
      const auto stage1 = stage1_sentence_for(s.table, make_bundle(s.data[0], u.train, pos, {}, s.opts)).text;
      EXPECT_EQ(b[i].input.text + " " + stage1, full[i].input.text);
      EXPECT_EQ(a[i].target, full[i].target);
    }
  }
}

TEST(Bundle, WindowTimeAndPlaces) {
  std::vector<UsageRecord> stream;
  Vocab vocab;
  const auto app = *vocab.intern_app("a", "Social");
  const std::vector<std::vector<std::string>> places = {{"home"}, {"gym", "home"}, {}, {"office"}, {"cafe", "office"}};
  for (std::size_t i = 0; i < 20; ++i) {
    std::optional<std::vector<std::string>> p;
    if (i >= 15 && !places[i - 15].empty()) p = places[i - 15];
    stream.push_back({"u", static_cast<Timestamp>(i * 60), app, vocab.category_of(app), p});
  }
  SplitCorpus c{"d", vocab, {}};
  const auto b = make_bundle(c, stream, 20 - 1, {}, {});
  EXPECT_EQ(b.app_history.size(), kMaxHistory);
  EXPECT_EQ(b.category_history.front(), "Social");
  EXPECT_EQ(b.time, clock::local_time(stream[19].timestamp));
  // Most recent distinct labels before the target (whose own labels are
  // unseen at prediction time), oldest first.
  ASSERT_TRUE(b.poi_labels);
  EXPECT_EQ(*b.poi_labels, (std::vector<std::string>{"gym", "home", "office"}));
}

TEST(TestCases, EveryTestRecordWithFullHistory) {
  Fixture s;
  const auto cases = build_test_cases(s.data[0], s.opts);
  std::size_t expected = 0;
  for (const auto& u : s.data[0].users) expected += u.test.size();
  ASSERT_EQ(cases.size(), expected);
  const auto& u0 = s.data[0].users[0];
  EXPECT_EQ(cases[0].truth, u0.test[0].app_id);
  EXPECT_EQ(cases[0].bundle.app_history.back(), u0.validation.back().app_id);
  for (std::size_t i = 0; i < cases.size(); ++i) EXPECT_EQ(cases[i].id, i);
}

TestCase one_case() {
  TestCase tc;
  tc.bundle.app_history = {1, 2};
  tc.bundle.category_history = {"Social", "Travel"};
  tc.bundle.time = PredictionTime{Weekday::kMonday, 9};
  tc.bundle.installed_apps = {{"Social", {1}}, {"Travel", {2}}};
  return tc;
}

TypeTable tiny_table() {
  return build_type_table_from_streams(std::vector<std::vector<std::string>>{{"Social", "Travel", "Social"}}, 3, 3);
}

TEST(Predict, DegenerateBackend) {
  FixedPredictor s2(std::vector<std::string>(20, "This user will use App 4."));
  PipelineOptions opts;
  const auto r = predict_case(one_case(), {nullptr, &s2}, tiny_table(), opts);
  EXPECT_EQ(r.ids(), std::vector<AppId>{4});
  EXPECT_EQ(r.attempts_used, 4 * opts.k);
  EXPECT_TRUE(r.stage1_fallback);
}

TEST(Predict, DuplicatesAreCollapsed) {
  FixedPredictor s2({"This user will use App 4.", "This user will use App 4.", "This user will use App 9."});
  PipelineOptions opts;
  opts.k = 2;
  const auto r = predict_case(one_case(), {nullptr, &s2}, tiny_table(), opts);
  EXPECT_EQ(r.ids(), (std::vector<AppId>{4, 9}));
  EXPECT_EQ(s2.calls, 2);
}

TEST(Predict, UnparseableCandidatesGiveEmptyPrediction) {
  FixedPredictor s2({"maybe App 4", "no idea"});
  const auto r = predict_case(one_case(), {nullptr, &s2}, tiny_table(), {});
  EXPECT_TRUE(r.apps.empty());
  const std::vector<std::vector<AppId>> preds = {r.ids()};
  const std::vector<AppId> truth = {4};
  EXPECT_EQ(accuracy_at_k(preds, truth, 5), 0.0);
}

TEST(Predict, Stage1OutputFeedsStage2) {
  const std::string s1_text = "Based on the global information, the next app will be a Travel app (100%)";
  FixedPredictor s1({s1_text});
  FixedPredictor s2({"This user will use App 2."});
  PipelineOptions opts;
  opts.k = 1;
  const auto with = predict_case(one_case(), {&s1, &s2}, tiny_table(), opts);
  EXPECT_FALSE(with.stage1_fallback);
  const auto prompt_with = s2.last_prompt;
  EXPECT_TRUE(prompt_with.ends_with(" " + s1_text));

  opts.flags.use_stage1 = false;
  predict_case(one_case(), {&s1, &s2}, tiny_table(), opts);
  EXPECT_EQ(s2.last_prompt + " " + s1_text, prompt_with);

  // An unparseable stage-1 answer falls back to the table sentence.
  FixedPredictor bad({"travel, probably"});
  opts.flags.use_stage1 = true;
  const auto fb = predict_case(one_case(), {&bad, &s2}, tiny_table(), opts);
  EXPECT_TRUE(fb.stage1_fallback);
  EXPECT_TRUE(s2.last_prompt.ends_with(stage1_sentence_for(tiny_table(), one_case().bundle).text));
}

TEST(Predict, ReferenceTopFiveIsHighestInterpolatedProbability) {
  Fixture s;
  const auto models = fit_reference_models(s.data, s.table, s.opts);
  auto s1 = models.stage1;
  auto s2 = models.stage2.at(s.data[0].dataset_id);
  const auto cases = build_test_cases(s.data[0], s.opts);
  for (const auto& tc : cases) {
    const auto r = predict_case(tc, {&s1, &s2}, s.table, s.opts);
    // Recompute the stage-2 prompt the pipeline used and rank all apps by score.
    const auto p1 = templater::render_context(tc.bundle, Stage::kAppType, s.opts.flags).text;
    const auto top1 = s1.generate_const({0, p1, 1, Stage::kAppType});
    const auto dist = templater::parse_type_result(top1.at(0).text);
    const auto prompt = stage2_input(tc.bundle, templater::render_type_result(*dist), s.opts).text;
    std::vector<std::pair<double, AppId>> ranked;
    for (const auto& [t, p] : s2.score_all(prompt)) ranked.emplace_back(-p, *templater::parse_prediction(t));
    // The model keeps the top five with ties by app id; the pipeline then
    // orders ties by candidate text.
    std::sort(ranked.begin(), ranked.end());
    if (ranked.size() > 5) ranked.resize(5);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return templater::render_target(a.second).text < templater::render_target(b.second).text;
    });
    ASSERT_EQ(r.apps.size(), ranked.size());
    for (std::size_t i = 0; i < r.apps.size(); ++i) {
      EXPECT_EQ(r.apps[i].app, ranked[i].second);
      EXPECT_DOUBLE_EQ(r.apps[i].score, -ranked[i].first);
    }
  }
}

TEST(Predict, WorkerCountDoesNotChangeResults) {
  Fixture s;
  auto models = fit_reference_models(s.data, s.table, s.opts);
  const auto cases = build_test_cases(s.data[0], s.opts);
  const Backends b{&models.stage1, &models.stage2.at(s.data[0].dataset_id)};
  auto opts4 = s.opts;
  opts4.workers = 4;
  EXPECT_EQ(predict_all(cases, b, s.table, s.opts), predict_all(cases, b, s.table, opts4));
}

TEST(Options, Validation) {
  PipelineOptions o;
  EXPECT_NO_THROW(o.validate());
  o.n = 1;
  EXPECT_THROW(o.validate(), ConfigError);
  o = {};
  o.window = 16;
  EXPECT_THROW(o.validate(), ConfigError);
  o = {};
  o.flags = {false, false, false, false};
  EXPECT_THROW(o.validate(), ConfigError);
  const auto rows = ablation_rows();
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].first, "full");
  EXPECT_EQ(rows[2].first, "w/o App seq info");
  EXPECT_FALSE(rows[2].second.use_app_history);
}

}  // namespace
}  // namespace nextapp
