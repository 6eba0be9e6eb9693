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

// nextapp: command-line entry point.
//
//   nextapp synth          write a synthetic log, manifest and config
//   nextapp ingest         logs -> canonical corpus
//   nextapp build-prompts  corpus -> type table + training pairs
//   nextapp fit            pairs -> reference models
//   nextapp predict        corpus + models/backends -> predictions
//   nextapp eval           predictions -> reports (model, MFU, MRU)
//   nextapp ablate         full model + four ablations -> reports
//
// Exit status: 0 success, 1 unexpected failure, 2 usage or config error,
// 3 missing or mismatched artifact, 4 input data error, 5 backend error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nextapp.hpp"

namespace {

namespace fs = std::filesystem;
using nextapp::CommandContext;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kArtifactError = 3,
  kDataError = 4,
  kBackendError = 5,
};

struct Flags {
  std::string config;
  std::vector<std::string> datasets;
  std::string stage;
  std::size_t k = 0;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;
  std::string backend;
  std::optional<std::string> ablate;
  std::string out;
  bool force = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Run configuration file (JSON)");
  cmd->add_option("--dataset", f.datasets, "Dataset manifest; replaces the config's list");
  cmd->add_option("--stage", f.stage, "Restrict to stage 1 or 2")->check(CLI::IsMember({"1", "2"}));
  cmd->add_option("--k", f.k, "Predictions collected per test case");
  cmd->add_option("--seed", f.seed, "Seed");
  cmd->add_option("--workers", f.workers, "Worker threads");
  cmd->add_option("--backend", f.backend,
                  "reference | exec:<command> | tcp:<host:port> (both stages)");
  cmd->add_option("--ablate", f.ablate,
                  "Comma list of no-stage1,no-app-history,no-installed-apps,no-optional-context");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_flag("--force", f.force, "Accept artifacts produced by another config");
}

CommandContext make_context(const Flags& f) {
  CommandContext ctx;
  if (!f.config.empty()) ctx.config = nextapp::load_run_config(f.config);
  if (!f.datasets.empty()) {
    ctx.config.dataset_manifests.clear();
    for (const auto& d : f.datasets) ctx.config.dataset_manifests.emplace_back(d);
  }
  if (f.k > 0) ctx.config.k = f.k;
  if (f.seed) ctx.config.seed = *f.seed;
  if (f.workers > 0) ctx.config.workers = f.workers;
  if (!f.backend.empty()) {
    ctx.config.stage1_backend = ctx.config.stage2_backend = nextapp::BackendSpec::parse(f.backend);
  }
  if (f.ablate) ctx.config.flags = nextapp::parse_ablation_list(*f.ablate);
  if (!f.out.empty()) ctx.config.out = f.out;
  if (!f.stage.empty()) ctx.stage = std::stoi(f.stage);
  ctx.force = f.force;
  return ctx;
}

struct SynthFlags {
  std::string out = "synthetic";
  std::uint64_t seed = 7;
  std::size_t users = 20;
  std::size_t events = 250;
};

void run_synth(const SynthFlags& f) {
  nextapp::synthetic::MarkovSpec spec;
  spec.seed = f.seed;
  spec.users = f.users;
  spec.events_per_user = f.events;
  const fs::path dir = f.out;
  fs::create_directories(dir);
  std::ofstream(dir / "usage.csv", std::ios::binary) << nextapp::synthetic::markov_log(spec);
  std::ofstream(dir / "manifest.json", std::ios::binary)
      << nlohmann::json{{"dataset_id", "synthetic"},
                        {"files", {"usage.csv"}},
                        {"delimiter", ","},
                        {"columns",
                         {{"user", "user"},
                          {"timestamp", "timestamp"},
                          {"app", "app"},
                          {"category", "category"},
                          {"poi", "poi"}}},
                        {"timestamp_format", "epoch"}}
             .dump(2)
      << '\n';
  std::ofstream(dir / "config.json", std::ios::binary)
      << nlohmann::json{{"datasets", {"manifest.json"}}, {"out", "run"}, {"seed", f.seed}}.dump(2)
      << '\n';
  std::cerr << "wrote " << (dir / "usage.csv").string() << ", manifest.json and config.json\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  CLI::App app{"Two-stage next-app prediction pipeline and evaluation harness"};
  app.require_subcommand(1);

  Flags flags;
  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic Markov usage log");
  synth_cmd->add_option("--out", synth.out, "Output directory");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--users", synth.users, "Number of users");
  synth_cmd->add_option("--events", synth.events, "Events per user");

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"ingest", "Parse logs, sessionize, filter and split into a canonical corpus"},
      {"build-prompts", "Build the type table and training pair files"},
      {"fit", "Fit the reference backend on the pair files"},
      {"predict", "Predict every test case through the configured backends"},
      {"eval", "Score predictions against MFU and MRU baselines"},
      {"ablate", "Evaluate the full model and its four ablations"},
  };
  std::map<std::string, CLI::App*> cmds;
  for (const auto& s : subs) {
    cmds[s.name] = app.add_subcommand(s.name, s.help);
    add_common(cmds[s.name], flags);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) {
      run_synth(synth);
      return kOk;
    }
    const auto ctx = make_context(flags);
    if (cmds["ingest"]->parsed()) nextapp::cmd_ingest(ctx);
    if (cmds["build-prompts"]->parsed()) nextapp::cmd_build_prompts(ctx);
    if (cmds["fit"]->parsed()) nextapp::cmd_fit(ctx);
    if (cmds["predict"]->parsed()) nextapp::cmd_predict(ctx);
    if (cmds["eval"]->parsed()) std::cout << nextapp::format_table(nextapp::cmd_eval(ctx));
    if (cmds["ablate"]->parsed()) std::cout << nextapp::format_table(nextapp::cmd_ablate(ctx));
  } catch (const nextapp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nextapp::ArtifactError& e) {
    std::cerr << "artifact error: " << e.what() << '\n';
    return kArtifactError;
  } catch (const nextapp::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const nextapp::TransportError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kBackendError;
  } catch (const nextapp::ProtocolError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kBackendError;
  } catch (const nextapp::RemoteError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return kBackendError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
