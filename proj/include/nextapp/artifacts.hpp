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

// On-disk artifacts. Every file starts with the config fingerprint that
// produced it: a "# config-hash <hex>" line for TSV files, a "config_hash"
// field in the header object for JSONL files.
//
//   corpus/<dataset>/{train,validation,test}.tsv   user ts app_id category_id places
//   corpus/<dataset>/vocab.tsv                     app/category/poi tables
//   corpus/<dataset>/rejects.tsv                   line  reason  raw line
//   prompts/type_table.jsonl
//   prompts/stage1_pairs.tsv, prompts/<dataset>/stage2_pairs.tsv   input<TAB>target
//   model/stage1.jsonl, model/<dataset>/stage2.jsonl
//   predictions/<dataset>.jsonl
//   reports/*.jsonl, reports/*.txt

#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nextapp/corpus.hpp"
#include "nextapp/error.hpp"
#include "nextapp/eval.hpp"
#include "nextapp/pipeline.hpp"
#include "nextapp/text.hpp"

namespace nextapp::artifacts {

namespace fs = std::filesystem;

inline constexpr std::string_view kHashPrefix = "# config-hash ";

inline void check_hash(const std::string& found, const std::string& expected, bool force,
                       const fs::path& what) {
  if (found != expected && !force) {
    throw ArtifactError(what.string() + " was produced by config " + found +
                        ", current config is " + expected + " (rerun upstream or pass --force)");
  }
}

inline std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ArtifactError("missing artifact " + p.string());
  return in;
}

// Reads the "# config-hash" header line of a TSV artifact.
inline std::string read_tsv_hash(std::istream& in, const fs::path& what) {
  std::string line;
  if (!std::getline(in, line) || !line.starts_with(kHashPrefix)) {
    throw ArtifactError(what.string() + " has no config-hash header");
  }
  return line.substr(kHashPrefix.size());
}

inline void write_records(std::ostream& out, std::span<const UsageRecord> records) {
  for (const auto& r : records) {
    out << r.user_id << '\t' << r.timestamp << '\t' << r.app_id << '\t' << r.category_id << '\t';
    if (r.poi_labels) out << text::join(*r.poi_labels, ";");
    out << '\n';
  }
}

inline std::vector<UsageRecord> read_records(std::istream& in, const fs::path& what) {
  std::vector<UsageRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = text::split(line, "\t");
    const auto bad = [&] { return ArtifactError("malformed record in " + what.string() + ": " + line); };
    if (f.size() != 5) throw bad();
    UsageRecord r;
    r.user_id = std::string(f[0]);
    const auto ts = text::parse_int<Timestamp>(f[1]);
    const auto app = text::parse_int<AppId>(f[2]);
    const auto cat = text::parse_int<CategoryId>(f[3]);
    if (!ts || !app || !cat) throw bad();
    r.timestamp = *ts;
    r.app_id = *app;
    r.category_id = *cat;
    if (!f[4].empty()) {
      std::vector<std::string> labels;
      for (auto l : text::split(f[4], ";")) labels.emplace_back(l);
      r.poi_labels = std::move(labels);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_corpus(const fs::path& dir, const SplitCorpus& corpus, const std::string& hash,
                         std::span<const Reject> rejects = {}) {
  const auto d = dir / corpus.dataset_id;
  {
    auto out = open_out(d / "vocab.tsv");
    out << kHashPrefix << hash << '\n';
    for (CategoryId c = 0; c < corpus.vocab.category_count(); ++c) {
      out << "category\t" << c << '\t' << corpus.vocab.category_name(c) << '\n';
    }
    for (AppId a = 0; a < corpus.vocab.app_count(); ++a) {
      out << "app\t" << a << '\t' << corpus.vocab.app_name(a) << '\t' << corpus.vocab.category_of(a)
          << '\n';
    }
    for (const auto& p : corpus.vocab.poi_labels()) out << "poi\t" << p << '\n';
  }
  const auto split_file = [&](const char* name, auto member) {
    auto out = open_out(d / name);
    out << kHashPrefix << hash << '\n';
    for (const auto& u : corpus.users) write_records(out, u.*member);
  };
  split_file("train.tsv", &UserSplit::train);
  split_file("validation.tsv", &UserSplit::validation);
  split_file("test.tsv", &UserSplit::test);
  auto rej = open_out(d / "rejects.tsv");
  rej << kHashPrefix << hash << '\n';
  for (const auto& r : rejects) rej << r.line_number << '\t' << r.reason << '\t' << r.line << '\n';
}

inline SplitCorpus read_corpus(const fs::path& dir, const std::string& dataset_id,
                               const std::string& expected_hash, bool force) {
  SplitCorpus corpus;
  corpus.dataset_id = dataset_id;
  const auto d = dir / dataset_id;
  {
    const auto p = d / "vocab.tsv";
    auto in = open_in(p);
    check_hash(read_tsv_hash(in, p), expected_hash, force, p);
    std::string line;
    std::vector<std::pair<std::string, CategoryId>> apps;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = text::split(line, "\t");
      if (f[0] == "category" && f.size() == 3) {
        if (corpus.vocab.intern_category(std::string(f[2])) != text::parse_int<CategoryId>(f[1])) {
          throw ArtifactError("category ids out of order in " + p.string());
        }
      } else if (f[0] == "app" && f.size() == 4) {
        const auto cat = text::parse_int<CategoryId>(f[3]);
        if (!cat || *cat >= corpus.vocab.category_count()) throw ArtifactError("bad app line in " + p.string());
        const auto id = corpus.vocab.intern_app(std::string(f[2]), corpus.vocab.category_name(*cat));
        if (!id || id != text::parse_int<AppId>(f[1])) throw ArtifactError("app ids out of order in " + p.string());
      } else if (f[0] == "poi" && f.size() == 2) {
        corpus.vocab.add_poi(std::string(f[1]));
      } else {
        throw ArtifactError("malformed vocab line in " + p.string());
      }
    }
  }
  std::map<std::string, UserSplit> users;
  const auto load = [&](const char* name, auto member) {
    const auto p = d / name;
    auto in = open_in(p);
    check_hash(read_tsv_hash(in, p), expected_hash, force, p);
    for (auto& r : read_records(in, p)) {
      if (!corpus.vocab.contains(r)) throw ArtifactError("record outside vocab in " + p.string());
      auto& u = users[r.user_id];
      u.user_id = r.user_id;
      (u.*member).push_back(std::move(r));
    }
  };
  load("train.tsv", &UserSplit::train);
  load("validation.tsv", &UserSplit::validation);
  load("test.tsv", &UserSplit::test);
  for (auto& [_, u] : users) corpus.users.push_back(std::move(u));
  return corpus;
}

inline void write_pairs(const fs::path& p, std::span<const TrainingPair> pairs,
                        const std::string& hash) {
  auto out = open_out(p);
  out << kHashPrefix << hash << '\n';
  for (const auto& pr : pairs) out << pr.input.text << '\t' << pr.target.text << '\n';
}

inline std::vector<TrainingPair> read_pairs(const fs::path& p, Stage stage,
                                            const std::string& expected_hash, bool force) {
  auto in = open_in(p);
  check_hash(read_tsv_hash(in, p), expected_hash, force, p);
  std::vector<TrainingPair> pairs;
  std::string line;
  const auto in_kind = stage == Stage::kAppType ? PromptKind::kStage1Input : PromptKind::kStage2Input;
  const auto out_kind = stage == Stage::kAppType ? PromptKind::kStage1Result : PromptKind::kStage2Target;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with('#')) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ArtifactError("pair line without a tab in " + p.string());
    pairs.push_back({{line.substr(0, tab), in_kind}, {line.substr(tab + 1), out_kind}});
  }
  return pairs;
}

struct PredictionFile {
  std::string dataset_id;
  std::string config_hash;
  AblationFlags flags;
  std::string backend_stage1;
  std::string backend_stage2;
  std::vector<RankedPrediction> predictions;
  std::vector<AppId> truths;
};

inline AblationFlags flags_from_json(const nlohmann::json& j) {
  AblationFlags f;
  f.use_stage1 = j.value("use_stage1", true);
  f.use_app_history = j.value("use_app_history", true);
  f.use_installed_apps = j.value("use_installed_apps", true);
  f.use_optional_context = j.value("use_optional_context", true);
  return f;
}

inline void write_predictions(const fs::path& p, const PredictionFile& pf,
                              std::span<const TestCase> cases) {
  auto out = open_out(p);
  out << nlohmann::json{{"kind", "predictions"},
                        {"dataset", pf.dataset_id},
                        {"config_hash", pf.config_hash},
                        {"flags", flags_json(pf.flags)},
                        {"backend", {{"stage1", pf.backend_stage1}, {"stage2", pf.backend_stage2}}}}
             .dump()
      << '\n';
  for (std::size_t i = 0; i < pf.predictions.size(); ++i) {
    const auto& pr = pf.predictions[i];
    nlohmann::json apps = nlohmann::json::array();
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& a : pr.apps) {
      apps.push_back(a.app);
      scores.push_back(a.score);
    }
    out << nlohmann::json{{"id", pr.test_case_id},   {"user", cases[i].user_id},
                          {"truth", cases[i].truth}, {"apps", apps},
                          {"scores", scores},        {"attempts", pr.attempts_used},
                          {"stage1_fallback", pr.stage1_fallback}}
               .dump()
        << '\n';
  }
}

inline PredictionFile read_predictions(const fs::path& p, const std::string& expected_hash,
                                       bool force) {
  auto in = open_in(p);
  std::string line;
  if (!std::getline(in, line)) throw ArtifactError(p.string() + " is empty");
  const auto h = nlohmann::json::parse(line, nullptr, false);
  if (h.is_discarded() || h.value("kind", "") != "predictions") {
    throw ArtifactError(p.string() + " is not a predictions file");
  }
  PredictionFile pf;
  pf.dataset_id = h.value("dataset", "");
  pf.config_hash = h.value("config_hash", "");
  check_hash(pf.config_hash, expected_hash, force, p);
  pf.flags = flags_from_json(h.value("flags", nlohmann::json::object()));
  pf.backend_stage1 = h["backend"].value("stage1", "");
  pf.backend_stage2 = h["backend"].value("stage2", "");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ArtifactError("malformed prediction line in " + p.string());
    RankedPrediction pr;
    pr.test_case_id = j.at("id").get<std::uint64_t>();
    const auto apps = j.at("apps").get<std::vector<AppId>>();
    const auto scores = j.at("scores").get<std::vector<double>>();
    for (std::size_t i = 0; i < apps.size(); ++i) pr.apps.push_back({apps[i], scores.at(i)});
    pr.attempts_used = j.value("attempts", std::size_t{0});
    pr.stage1_fallback = j.value("stage1_fallback", false);
    pf.predictions.push_back(std::move(pr));
    pf.truths.push_back(j.at("truth").get<AppId>());
  }
  return pf;
}

}  // namespace nextapp::artifacts
