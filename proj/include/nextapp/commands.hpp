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

// The command layer behind the CLI: ingest, build-prompts, fit, predict,
// eval and ablate. Each command reads upstream artifacts from the output
// directory and writes its own, refusing inputs produced by another config
// unless forced.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nextapp/artifacts.hpp"
#include "nextapp/config.hpp"
#include "nextapp/corpus.hpp"
#include "nextapp/eval.hpp"
#include "nextapp/external_client.hpp"
#include "nextapp/pipeline.hpp"
#include "nextapp/reference_backend.hpp"
#include "nextapp/transport.hpp"
#include "nextapp/typeprompt.hpp"

namespace nextapp {

struct CommandContext {
  RunConfig config;
  bool force = false;
  std::optional<int> stage;  // restrict build-prompts / fit to one stage
  std::ostream* log = &std::cerr;

  fs::path dir(const char* sub) const { return config.out / sub; }
  bool wants_stage(int s) const { return !stage || *stage == s; }
};

namespace commands_detail {

inline std::vector<DatasetManifest> manifests(const CommandContext& ctx) {
  std::vector<DatasetManifest> out;
  for (const auto& p : ctx.config.dataset_manifests) out.push_back(load_manifest(p));
  std::set<std::string> ids;
  for (const auto& m : out) {
    if (!ids.insert(m.dataset_id).second) throw ConfigError("duplicate dataset_id " + m.dataset_id);
  }
  return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace commands_detail

inline std::vector<SplitCorpus> cmd_ingest(const CommandContext& ctx) {
  ctx.config.validate();
  const auto hash = ctx.config.hash();
  std::vector<SplitCorpus> corpora;
  for (const auto& m : commands_detail::manifests(ctx)) {
    Vocab vocab;
    std::vector<UsageRecord> records;
    std::vector<Reject> rejects;
    for (const auto& f : m.files) {
      std::ifstream in(f, std::ios::binary);
      if (!in) throw ArtifactError("missing input log " + f.string());
      auto parsed = parse_log(in, m.format, vocab);
      records.insert(records.end(), std::make_move_iterator(parsed.records.begin()),
                     std::make_move_iterator(parsed.records.end()));
      rejects.insert(rejects.end(), parsed.rejects.begin(), parsed.rejects.end());
    }
    PreprocessStats stats;
    auto corpus = preprocess(m.dataset_id, std::move(vocab), records,
                             ctx.config.preprocess_options(), &stats);
    artifacts::write_corpus(ctx.dir("corpus"), corpus, hash, rejects);
    *ctx.log << "ingest " << m.dataset_id << ": " << stats.input_records << " records, "
             << stats.sessions << " sessions, dropped " << stats.dropped_sessions
             << " sessions and " << stats.dropped_users << " users, kept " << stats.kept_records
             << " records of " << corpus.users.size() << " users, " << rejects.size()
             << " rejected lines\n";
    corpora.push_back(std::move(corpus));
  }
  return corpora;
}

inline std::vector<SplitCorpus> load_corpora(const CommandContext& ctx) {
  const auto hash = ctx.config.hash();
  std::vector<SplitCorpus> corpora;
  for (const auto& m : commands_detail::manifests(ctx)) {
    corpora.push_back(artifacts::read_corpus(ctx.dir("corpus"), m.dataset_id, hash, ctx.force));
  }
  return corpora;
}

inline TypeTable load_table(const CommandContext& ctx) {
  const auto p = ctx.dir("prompts") / "type_table.jsonl";
  auto in = artifacts::open_in(p);
  std::string found;
  auto table = load_type_table(in, &found);
  artifacts::check_hash(found, ctx.config.hash(), ctx.force, p);
  return table;
}

inline void cmd_build_prompts(const CommandContext& ctx) {
  ctx.config.validate();
  const auto hash = ctx.config.hash();
  const auto corpora = load_corpora(ctx);
  const auto opts = ctx.config.pipeline_options();
  const auto table = build_type_table(corpora, opts.n, opts.type_k, opts.workers);
  {
    auto out = artifacts::open_out(ctx.dir("prompts") / "type_table.jsonl");
    save_type_table(out, table, hash);
  }
  if (ctx.wants_stage(1)) {
    const auto pairs = build_stage1_pairs(corpora, table, opts);
    artifacts::write_pairs(ctx.dir("prompts") / "stage1_pairs.tsv", pairs, hash);
    *ctx.log << "stage 1: " << pairs.size() << " pairs, " << table.entries().size() << " keys\n";
  }
  if (ctx.wants_stage(2)) {
    for (const auto& c : corpora) {
      const auto pairs = build_stage2_pairs(c, table, opts);
      artifacts::write_pairs(ctx.dir("prompts") / c.dataset_id / "stage2_pairs.tsv", pairs, hash);
      *ctx.log << "stage 2 " << c.dataset_id << ": " << pairs.size() << " pairs\n";
    }
  }
}

inline fs::path stage1_model_path(const CommandContext& ctx) { return ctx.dir("model") / "stage1.jsonl"; }
inline fs::path stage2_model_path(const CommandContext& ctx, const std::string& ds) {
  return ctx.dir("model") / ds / "stage2.jsonl";
}

inline void cmd_fit(const CommandContext& ctx) {
  ctx.config.validate();
  const auto hash = ctx.config.hash();
  const auto ref = ctx.config.reference_options();
  if (ctx.wants_stage(1)) {
    if (ctx.config.stage1_backend.kind != BackendSpec::Kind::kReference) {
      *ctx.log << "stage 1 uses an external backend; nothing to fit\n";
    } else {
      const auto pairs =
          artifacts::read_pairs(ctx.dir("prompts") / "stage1_pairs.tsv", Stage::kAppType, hash, ctx.force);
      const auto model = ReferenceBackend::fit(pairs, Stage::kAppType, ref);
      auto out = artifacts::open_out(stage1_model_path(ctx));
      model.save(out, hash);
      *ctx.log << "stage 1: fitted " << model.fitted_pairs() << " pairs\n";
    }
  }
  if (ctx.wants_stage(2)) {
    if (ctx.config.stage2_backend.kind != BackendSpec::Kind::kReference) {
      *ctx.log << "stage 2 uses an external backend; nothing to fit\n";
      return;
    }
    for (const auto& m : commands_detail::manifests(ctx)) {
      const auto pairs = artifacts::read_pairs(
          ctx.dir("prompts") / m.dataset_id / "stage2_pairs.tsv", Stage::kNextApp, hash, ctx.force);
      const auto model = ReferenceBackend::fit(pairs, Stage::kNextApp, ref);
      auto out = artifacts::open_out(stage2_model_path(ctx, m.dataset_id));
      model.save(out, hash);
      *ctx.log << "stage 2 " << m.dataset_id << ": fitted " << model.fitted_pairs() << " pairs\n";
    }
  }
}

// Owns whatever backs the two stages for one dataset.
struct BackendSet {
  std::shared_ptr<Predictor> stage1;
  std::shared_ptr<Predictor> stage2;

  Backends view() const { return {stage1.get(), stage2.get()}; }
};

inline std::shared_ptr<Predictor> connect_external(const BackendSpec& spec, const RunConfig& cfg) {
  ClientOptions co;
  co.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.timeout_seconds * 1000));
  co.max_in_flight = cfg.max_in_flight;
  co.retries = cfg.retries;
  std::unique_ptr<LineTransport> t;
  if (spec.kind == BackendSpec::Kind::kExec) {
    t = ChildProcessTransport::spawn(spec.command);
  } else {
    t = TcpTransport::connect(spec.host, spec.port, cfg.retries);
  }
  return std::make_shared<ExternalClient>(std::move(t), co);
}

// External backends are shared across datasets and stages when the spec
// matches; reference models come from `models` or the model directory.
class BackendFactory {
 public:
  explicit BackendFactory(const CommandContext& ctx, ReferenceModels* models = nullptr)
      : ctx_(ctx), models_(models) {}

  BackendSet for_dataset(const std::string& dataset_id) {
    BackendSet set;
    if (ctx_.config.flags.use_stage1) set.stage1 = make(ctx_.config.stage1_backend, 1, dataset_id);
    set.stage2 = make(ctx_.config.stage2_backend, 2, dataset_id);
    return set;
  }

 private:
  std::shared_ptr<Predictor> make(const BackendSpec& spec, int stage, const std::string& ds) {
    if (spec.kind != BackendSpec::Kind::kReference) {
      auto& slot = external_[spec.str()];
      if (!slot) slot = connect_external(spec, ctx_.config);
      return slot;
    }
    if (models_) {
      // Non-owning: the caller keeps `models` alive for the factory's lifetime.
      ReferenceBackend& m = stage == 1 ? models_->stage1 : models_->stage2.at(ds);
      return std::shared_ptr<Predictor>(std::shared_ptr<Predictor>{}, &m);
    }
    const auto p = stage == 1 ? stage1_model_path(ctx_) : stage2_model_path(ctx_, ds);
    auto in = artifacts::open_in(p);
    std::string found;
    auto model = std::make_shared<ReferenceBackend>(ReferenceBackend::load(in, &found));
    artifacts::check_hash(found, ctx_.config.hash(), ctx_.force, p);
    return model;
  }

  const CommandContext& ctx_;
  ReferenceModels* models_;
  std::map<std::string, std::shared_ptr<Predictor>> external_;
};

inline fs::path predictions_path(const CommandContext& ctx, const std::string& ds) {
  return ctx.dir("predictions") / (ds + ".jsonl");
}

inline void cmd_predict(const CommandContext& ctx) {
  ctx.config.validate();
  const auto hash = ctx.config.hash();
  const auto corpora = load_corpora(ctx);
  const auto table = load_table(ctx);
  const auto opts = ctx.config.pipeline_options();
  BackendFactory factory(ctx);
  for (const auto& c : corpora) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto backends = factory.for_dataset(c.dataset_id);
    const auto cases = build_test_cases(c, opts);
    artifacts::PredictionFile pf;
    pf.dataset_id = c.dataset_id;
    pf.config_hash = hash;
    pf.flags = opts.flags;
    pf.backend_stage1 = opts.flags.use_stage1 ? ctx.config.stage1_backend.str() : "";
    pf.backend_stage2 = ctx.config.stage2_backend.str();
    pf.predictions = predict_all(cases, backends.view(), table, opts);
    artifacts::write_predictions(predictions_path(ctx, c.dataset_id), pf, cases);
    *ctx.log << "predict " << c.dataset_id << ": " << cases.size() << " cases in "
             << commands_detail::seconds_since(t0) << " s\n";
  }
}

inline std::string model_label(const std::string& stage2_backend) {
  return "two-stage (" + stage2_backend + ")";
}

inline void write_report_files(const CommandContext& ctx, const std::string& stem,
                               const std::vector<EvalReport>& reports) {
  const auto hash = ctx.config.hash();
  {
    auto out = artifacts::open_out(ctx.dir("reports") / (stem + ".jsonl"));
    write_reports_jsonl(out, reports, hash);
  }
  auto out = artifacts::open_out(ctx.dir("reports") / (stem + ".txt"));
  out << format_table(reports);
}

inline std::vector<EvalReport> baseline_reports(const SplitCorpus& c, std::size_t k) {
  const auto truths = test_truths(c);
  std::vector<EvalReport> out;
  out.push_back(make_report("MFU", c.dataset_id, baseline_mfu(c, std::max<std::size_t>(k, 5)), truths));
  out.push_back(make_report("MRU", c.dataset_id, baseline_mru(c, std::max<std::size_t>(k, 5)), truths));
  return out;
}

// Model row plus MFU and MRU rows for every dataset.
inline std::vector<EvalReport> cmd_eval(const CommandContext& ctx) {
  ctx.config.validate();
  const auto hash = ctx.config.hash();
  const auto corpora = load_corpora(ctx);
  std::vector<EvalReport> reports;
  for (const auto& c : corpora) {
    const auto pf = artifacts::read_predictions(predictions_path(ctx, c.dataset_id), hash, ctx.force);
    if (pf.truths != test_truths(c)) {
      throw ArtifactError("predictions for " + c.dataset_id + " do not match the corpus test split");
    }
    std::vector<std::vector<AppId>> lists;
    for (const auto& p : pf.predictions) lists.push_back(p.ids());
    auto r = make_report(model_label(pf.backend_stage2), c.dataset_id, lists, pf.truths);
    r.flags = pf.flags;
    reports.push_back(std::move(r));
    for (auto& b : baseline_reports(c, ctx.config.k)) reports.push_back(std::move(b));
  }
  write_report_files(ctx, "eval", reports);
  return reports;
}

// Runs the full configuration and the four single-source ablations. With a
// reference backend both stages are refitted per row.
inline std::vector<EvalReport> cmd_ablate(const CommandContext& ctx) {
  ctx.config.validate();
  const auto corpora = load_corpora(ctx);
  const auto table = load_table(ctx);
  std::vector<EvalReport> reports;
  for (const auto& [row, flags] : ablation_rows()) {
    const auto t0 = std::chrono::steady_clock::now();
    CommandContext row_ctx = ctx;
    row_ctx.config.flags = flags;
    auto opts = row_ctx.config.pipeline_options();
    std::optional<ReferenceModels> models;
    if (ctx.config.stage1_backend.kind == BackendSpec::Kind::kReference ||
        ctx.config.stage2_backend.kind == BackendSpec::Kind::kReference) {
      models = fit_reference_models(corpora, table, opts, row_ctx.config.reference_options());
    }
    BackendFactory factory(row_ctx, models ? &*models : nullptr);
    for (const auto& c : corpora) {
      const auto backends = factory.for_dataset(c.dataset_id);
      const auto cases = build_test_cases(c, opts);
      const auto preds = predict_all(cases, backends.view(), table, opts);
      std::vector<std::vector<AppId>> lists;
      for (const auto& p : preds) lists.push_back(p.ids());
      auto r = make_report(model_label(ctx.config.stage2_backend.str()) + " [" + row + "]",
                           c.dataset_id, lists, test_truths(c));
      r.configuration = row;
      r.flags = flags;
      r.elapsed_seconds = commands_detail::seconds_since(t0);
      reports.push_back(std::move(r));
    }
    *ctx.log << "ablate " << row << ": " << commands_detail::seconds_since(t0) << " s\n";
  }
  write_report_files(ctx, "ablation", reports);
  return reports;
}

}  // namespace nextapp
