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

#include <random>

#include "nextapp.hpp"

namespace nextapp {
namespace {

using namespace templater;

TypeDistribution dist_of(std::vector<std::pair<std::string, int>> shares) {
  TypeDistribution d;
  for (auto& [c, p] : shares) d.entries.push_back({c, p / 100.0, p});
  return d;
}

TEST(Render, WorkedExamplesAreByteExact) {
  EXPECT_EQ(render_app_history({1, 4, 9}).text,
            "The apps 1, 4, and 9 are used prior to the prediction.");
  EXPECT_EQ(render_installed({{"travel", {1, 4, 12}}, {"utility", {2, 7, 16}}}).text,
            "travel apps : 1,4,12 utility apps : 2,7,16");
  EXPECT_EQ(render_time({Weekday::kTuesday, 14}).text, "On Tuesday 02 PM");
  EXPECT_EQ(render_poi({"service", "shopping", "restaurants"}).text,
            "The user is close to service, shopping and restaurants.");
  EXPECT_EQ(render_type_result(dist_of({{"travel", 70}, {"shopping", 20}, {"social", 10}})).text,
            "Based on the global information, the next app will be a travel app (70%), "
            "shopping app (20%) or social app (10%)");
  EXPECT_EQ(render_target(4).text, "This user will use App 4.");
  EXPECT_EQ(render_target(0).text, "This user will use App 0.");
  EXPECT_EQ(parse_prediction("This user will use App 4"), 4u);
  const auto d = parse_type_result(
      "Based on the global information, the next app will be a communication app (70%), social app "
      "(20%) or travel app (10%)");
  ASSERT_TRUE(d);
  EXPECT_TRUE(same_rendering(*d, dist_of({{"communication", 70}, {"social", 20}, {"travel", 10}})));
}

TEST(Render, ShortListsAndClockEdges) {
  EXPECT_EQ(render_app_history({7}).text, "The apps 7 are used prior to the prediction.");
  EXPECT_EQ(render_app_history({1, 4}).text, "The apps 1 and 4 are used prior to the prediction.");
  EXPECT_EQ(render_poi({"home"}).text, "The user is close to home.");
  EXPECT_EQ(render_poi({"home", "gym"}).text, "The user is close to home and gym.");
  EXPECT_EQ(render_time({Weekday::kSunday, 0}).text, "On Sunday 12 AM");
  EXPECT_EQ(render_time({Weekday::kMonday, 12}).text, "On Monday 12 PM");
  EXPECT_EQ(render_time({Weekday::kFriday, 9}).text, "On Friday 09 AM");
  EXPECT_EQ(render_type_result(dist_of({{"Games", 100}})).text,
            "Based on the global information, the next app will be a Games app (100%)");
  EXPECT_EQ(render_type_result(dist_of({{"a", 60}, {"b", 40}})).text,
            "Based on the global information, the next app will be a a app (60%) or b app (40%)");
}

TEST(Render, RejectsEmptyAndZeroPercentInputs) {
  EXPECT_THROW(render_app_history({}), ConfigError);
  EXPECT_THROW(render_poi({}), ConfigError);
  EXPECT_THROW(render_type_result({}), ConfigError);
  EXPECT_THROW(render_type_result(dist_of({{"a", 100}, {"b", 0}})), ConfigError);
  EXPECT_THROW(render_context({}, Stage::kNextApp, {}), ConfigError);
}

TEST(Render, ContextComponentOrder) {
  ContextBundle b;
  b.app_history = {3, 5};
  b.category_history = {"Social", "Travel"};
  b.installed_apps = {{"Social", {3}}, {"Travel", {5, 8}}};
  b.time = PredictionTime{Weekday::kWednesday, 18};
  b.poi_labels = std::vector<std::string>{"office"};
  EXPECT_EQ(render_context(b, Stage::kNextApp, {}).text,
            "The apps 3 and 5 are used prior to the prediction. Social apps : 3 Travel apps : 5,8 "
            "On Wednesday 06 PM The user is close to office.");
  EXPECT_EQ(render_context(b, Stage::kAppType, {}).text,
            "The apps Social and Travel are used prior to the prediction. On Wednesday 06 PM "
            "The user is close to office.");
}

TEST(Parse, WorkedExamplesParse) {
  EXPECT_EQ(parse_prediction("This user will use App 4."), 4u);
  EXPECT_EQ(parse_prediction("  This user will use App 4  "), 4u);
  const auto d = parse_type_result(
      "Based on the global information, the next app will be a travel app (70%), shopping app "
      "(20%) or social app (10%)");
  ASSERT_TRUE(d);
  ASSERT_EQ(d->entries.size(), 3u);
  EXPECT_EQ(d->entries[1].category, "shopping");
  EXPECT_EQ(d->entries[1].percent, 20);
  const auto p = parse_context("travel apps : 1,4,12 utility apps : 2,7,16 On Tuesday 02 PM",
                               Stage::kNextApp);
  ASSERT_TRUE(p);
  EXPECT_TRUE(p->has_installed);
  EXPECT_EQ(p->bundle.installed_apps.at("utility"), (std::vector<AppId>{2, 7, 16}));
  EXPECT_EQ(p->bundle.time, (PredictionTime{Weekday::kTuesday, 14}));
}

TEST(Parse, OffGrammarStringsAreRejected) {
  for (const char* s : {"", "App 4", "This user will use App .", "This user will use App -1.",
                        "This user will use App 4 or 5.", "This user will use app 4.",
                        "This user will use App four.", "the next app is 4"}) {
    EXPECT_FALSE(parse_prediction(s)) << s;
  }
  const std::string pre = "Based on the global information, the next app will be a ";
  EXPECT_FALSE(parse_type_result("Based on nothing"));
  for (const std::string s : {pre, pre + "a app (70%) b app (30%)", pre + "a app (70%), b app (30%)",
                              pre + "a app (0%)", pre + "a app (101%)", pre + "a app (7x%)",
                              pre + "a b app (50%)", pre + "a app (50%).", pre + "a app (050%)"}) {
    EXPECT_FALSE(parse_type_result(s)) << s;
  }
  for (const char* s : {"The apps 1, 4 and 9 are used prior to the prediction.",
                        "The apps 1, 4, and 9 are used prior to the prediction",
                        "The apps 01 are used prior to the prediction.",
                        "On Tuesday 2 PM", "On Tuesday 14 PM", "On Tuesday 00 AM", "On Tues 02 PM",
                        "The user is close to a, b, and c.", "travel apps : ", "travel apps : 1,,2",
                        "travel apps : 1 travel apps : 2", "On Monday 01 AM  The user is close to a.",
                        "On Monday 01 AM extra"}) {
    EXPECT_FALSE(parse_context(s, Stage::kNextApp)) << s;
  }
}

// Random labels from the prompt-safe alphabet, including words that also
// occur in the templates.
std::string random_label(std::mt19937_64& rng) {
  static const std::vector<std::string> tricky = {"and", "apps", "app", "On", "or", "a", "The",
                                                  "Monday", "12", "x.y", "Photo/Video", "St.Louis"};
  if (rng() % 4 == 0) return tricky[rng() % tricky.size()];
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-/&.'";
  std::string s;
  const std::size_t len = 1 + rng() % 10;
  for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
  return text::sanitize_label(s);
}

ContextBundle random_bundle(std::mt19937_64& rng) {
  ContextBundle b;
  const std::size_t h = rng() % (kMaxHistory + 1);
  for (std::size_t i = 0; i < h; ++i) {
    b.app_history.push_back(static_cast<AppId>(rng() % 3000));
    b.category_history.push_back(random_label(rng));
  }
  if (rng() % 5 != 0) b.time = PredictionTime{static_cast<Weekday>(rng() % 7), static_cast<int>(rng() % 24)};
  if (rng() % 2 == 0) {
    std::vector<std::string> places;
    const std::size_t n = 1 + rng() % 3;
    for (std::size_t i = 0; i < n; ++i) places.push_back(random_label(rng));
    b.poi_labels = places;
  }
  const std::size_t cats = rng() % 4;
  for (std::size_t i = 0; i < cats; ++i) {
    std::vector<AppId> apps;
    const std::size_t n = 1 + rng() % 5;
    for (std::size_t j = 0; j < n; ++j) apps.push_back(static_cast<AppId>(rng() % 500));
    b.installed_apps[random_label(rng)] = apps;
  }
  return b;
}

TypeDistribution random_dist(std::mt19937_64& rng) {
  TypeDistribution d;
  const std::size_t n = 1 + rng() % 4;
  for (std::size_t i = 0; i < n; ++i) {
    const int p = 1 + static_cast<int>(rng() % 100);
    d.entries.push_back({random_label(rng), p / 100.0, p});
  }
  return d;
}

TEST(RoundTrip, RandomBundlesSurviveRenderAndParse) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const auto b = random_bundle(rng);
    const auto ts = rng() % 2 ? TemplateSet::canonical() : TemplateSet::recent_usage();
    const bool has_any1 = !b.category_history.empty() || b.time || b.poi_labels;
    if (has_any1) {
      const auto s1 = render_context(b, Stage::kAppType, {}, ts).text;
      const auto p1 = parse_context(s1, Stage::kAppType, ts);
      ASSERT_TRUE(p1) << s1;
      EXPECT_EQ(p1->bundle.category_history, b.category_history) << s1;
      EXPECT_EQ(p1->bundle.time, b.time);
      EXPECT_EQ(p1->bundle.poi_labels, b.poi_labels) << s1;
    }
    const auto d = random_dist(rng);
    const auto stage1 = render_type_result(d);
    auto ctx2 = b.app_history.empty() && b.installed_apps.empty() && !b.time && !b.poi_labels
                    ? PromptSentence{}
                    : render_context(b, Stage::kNextApp, {}, ts);
    const auto s2 = with_stage1_result(ctx2, stage1).text;
    const auto p2 = parse_context(s2, Stage::kNextApp, ts);
    ASSERT_TRUE(p2) << s2;
    EXPECT_EQ(p2->bundle.app_history, b.app_history) << s2;
    EXPECT_EQ(p2->bundle.installed_apps, b.installed_apps) << s2;
    EXPECT_EQ(p2->has_installed, !b.installed_apps.empty());
    EXPECT_EQ(p2->bundle.time, b.time);
    EXPECT_EQ(p2->bundle.poi_labels, b.poi_labels) << s2;
    ASSERT_TRUE(p2->stage1);
    EXPECT_TRUE(same_rendering(*p2->stage1, d));

    const auto t = parse_type_result(stage1.text);
    ASSERT_TRUE(t) << stage1.text;
    EXPECT_EQ(render_type_result(*t).text, stage1.text);
    const AppId app = static_cast<AppId>(rng());
    EXPECT_EQ(parse_prediction(render_target(app).text), app);
  }
}

TEST(Ablation, EachFlagRemovesOnlyItsComponent) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 2000; ++i) {
    auto b = random_bundle(rng);
    b.time = PredictionTime{Weekday::kMonday, 8};  // keeps every ablated prompt non-empty
    const AblationFlags full;

    auto no_seq = full;
    no_seq.use_app_history = false;
    auto b_seq = b;
    b_seq.app_history.clear();
    EXPECT_EQ(render_context(b, Stage::kNextApp, no_seq).text,
              render_context(b_seq, Stage::kNextApp, full).text);

    auto no_inst = full;
    no_inst.use_installed_apps = false;
    auto b_inst = b;
    b_inst.installed_apps.clear();
    EXPECT_EQ(render_context(b, Stage::kNextApp, no_inst).text,
              render_context(b_inst, Stage::kNextApp, full).text);

    auto no_opt = full;
    no_opt.use_optional_context = false;
    auto b_opt = b;
    b_opt.poi_labels.reset();
    for (Stage st : {Stage::kAppType, Stage::kNextApp}) {
      EXPECT_EQ(render_context(b, st, no_opt).text, render_context(b_opt, st, full).text);
    }

    // The stage-1 switch does not touch the context itself.
    auto no_s1 = full;
    no_s1.use_stage1 = false;
    EXPECT_EQ(render_context(b, Stage::kNextApp, no_s1).text, render_context(b, Stage::kNextApp, full).text);
  }
}

TEST(TemplateSets, LookupByName) {
  EXPECT_EQ(TemplateSet::by_name("canonical"), TemplateSet::canonical());
  EXPECT_EQ(TemplateSet::by_name("recent"), TemplateSet::recent_usage());
  EXPECT_FALSE(TemplateSet::by_name("bogus"));
  EXPECT_EQ(render_app_history({1, 2}, TemplateSet::recent_usage()).text,
            "The user has recently used 1 and 2.");
}

TEST(Labels, SanitizingMakesLabelsParseable) {
  EXPECT_EQ(text::sanitize_label(" Photo & Video "), "Photo_&_Video");
  EXPECT_EQ(text::sanitize_label("a,b(c)%d:e;f|g"), "a_b_c__d_e_f_g");
  EXPECT_EQ(text::sanitize_label("St."), "St_");
  EXPECT_TRUE(text::is_sanitized_label("Photo/Video"));
  EXPECT_TRUE(text::is_sanitized_label("St.Louis"));
  EXPECT_FALSE(text::is_sanitized_label("x."));
  EXPECT_FALSE(text::is_sanitized_label("two words"));
  EXPECT_FALSE(text::is_sanitized_label(""));
}

}  // namespace
}  // namespace nextapp
