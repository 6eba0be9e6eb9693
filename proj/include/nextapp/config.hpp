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

// Declarative run configuration and dataset manifests (JSON files).

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nextapp/corpus.hpp"
#include "nextapp/error.hpp"
#include "nextapp/pipeline.hpp"
#include "nextapp/reference_backend.hpp"
#include "nextapp/text.hpp"

namespace nextapp {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ArtifactError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct DatasetManifest {
  std::string dataset_id;
  std::vector<fs::path> files;  // resolved against the manifest's directory
  LogFormat format;
  std::int64_t utc_offset_seconds = 0;
  std::string source_text;  // raw manifest, part of the config fingerprint
};

inline DatasetManifest load_manifest(const fs::path& path) {
  DatasetManifest m;
  m.source_text = read_file(path);
  const auto j = nlohmann::json::parse(m.source_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("manifest " + path.string() + " is not a JSON object");
  try {
    m.dataset_id = j.at("dataset_id").get<std::string>();
    if (m.dataset_id.empty() || !text::is_sanitized_label(m.dataset_id) ||
        m.dataset_id.find('/') != std::string::npos) {
      throw ConfigError("dataset_id must be a non-empty name without spaces or slashes");
    }
    for (const auto& f : j.at("files")) m.files.push_back(path.parent_path() / f.get<std::string>());
    if (m.files.empty()) throw ConfigError("manifest lists no files");
    auto delim = j.value("delimiter", std::string(","));
    if (delim == "\\t") delim = "\t";
    if (delim.size() != 1) throw ConfigError("delimiter must be one character");
    m.format.delimiter = delim[0];
    if (j.contains("columns")) {
      const auto& c = j.at("columns");
      m.format.user_column = c.value("user", m.format.user_column);
      m.format.timestamp_column = c.value("timestamp", m.format.timestamp_column);
      m.format.app_column = c.value("app", m.format.app_column);
      m.format.category_column = c.value("category", m.format.category_column);
      m.format.poi_column = c.value("poi", std::string());
    }
    const auto tf = j.value("timestamp_format", std::string("epoch"));
    if (tf == "epoch") {
      m.format.timestamp_format = TimestampFormat::kEpochSeconds;
    } else if (tf == "iso8601") {
      m.format.timestamp_format = TimestampFormat::kIso8601;
    } else {
      throw ConfigError("timestamp_format must be 'epoch' or 'iso8601'");
    }
    const auto ps = j.value("poi_separator", std::string(";"));
    if (ps.size() != 1) throw ConfigError("poi_separator must be one character");
    m.format.poi_separator = ps[0];
    m.format.max_reject_ratio = j.value("max_reject_ratio", 0.01);
    m.utc_offset_seconds = j.value("utc_offset_seconds", std::int64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

// Backend selection for one stage: "reference", "exec:<command>" or "tcp:<host:port>".
struct BackendSpec {
  enum class Kind { kReference, kExec, kTcp };
  Kind kind = Kind::kReference;
  std::string command;  // exec
  std::string host;     // tcp
  std::string port;     // tcp

  static BackendSpec parse(const std::string& s) {
    BackendSpec b;
    if (s == "reference") return b;
    if (s.starts_with("exec:") && s.size() > 5) {
      b.kind = Kind::kExec;
      b.command = s.substr(5);
      return b;
    }
    if (s.starts_with("tcp:")) {
      const auto hp = s.substr(4);
      const auto colon = hp.rfind(':');
      if (colon != std::string::npos && colon > 0 && colon + 1 < hp.size()) {
        b.kind = Kind::kTcp;
        b.host = hp.substr(0, colon);
        b.port = hp.substr(colon + 1);
        return b;
      }
    }
    throw ConfigError("backend must be 'reference', 'exec:<command>' or 'tcp:<host:port>', got '" +
                      s + "'");
  }

  std::string str() const {
    switch (kind) {
      case Kind::kReference: return "reference";
      case Kind::kExec: return "exec:" + command;
      case Kind::kTcp: return "tcp:" + host + ":" + port;
    }
    return {};
  }
};

// Applies a comma-separated ablation list to the full configuration, e.g.
// "no-stage1,no-app-history". "none" or empty leaves every source enabled.
inline AblationFlags parse_ablation_list(const std::string& list) {
  AblationFlags f;
  for (auto part : text::split(list, ",")) {
    const auto p = text::trim(part);
    if (p.empty() || p == "none") continue;
    if (p == "no-stage1") {
      f.use_stage1 = false;
    } else if (p == "no-app-history") {
      f.use_app_history = false;
    } else if (p == "no-installed-apps") {
      f.use_installed_apps = false;
    } else if (p == "no-optional-context") {
      f.use_optional_context = false;
    } else {
      throw ConfigError("unknown ablation '" + std::string(p) +
                        "' (expected no-stage1, no-app-history, no-installed-apps, "
                        "no-optional-context)");
    }
  }
  if (!f.valid()) throw ConfigError("ablation disables every context source");
  return f;
}

struct RunConfig {
  std::vector<fs::path> dataset_manifests;
  std::size_t n = kDefaultKeyLength;
  std::size_t type_k = kDefaultTopTypes;
  std::size_t k = 5;
  std::size_t window = kMaxHistory;
  Timestamp gap_seconds = kDefaultSessionGap;
  std::size_t max_session_records = 5000;
  std::size_t min_user_records = 10;
  std::size_t attempt_cap_factor = 4;
  AblationFlags flags;
  BackendSpec stage1_backend;
  BackendSpec stage2_backend;
  InterpolationWeights weights = kDefaultWeights;
  std::string template_set = "canonical";
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  fs::path out = "run";
  double timeout_seconds = 30.0;
  std::size_t retries = 2;
  std::size_t max_in_flight = 32;

  void validate() const {
    if (dataset_manifests.empty()) throw ConfigError("no dataset manifests configured");
    if (n < 2 || type_k < 1 || k < 1 || window < 1 || gap_seconds < 1 ||
        max_session_records < 1 || min_user_records < 1 || attempt_cap_factor < 1 ||
        workers < 1 || max_in_flight < 1 || !(timeout_seconds > 0)) {
      throw ConfigError("numeric parameters must be positive (n >= 2)");
    }
    if (min_user_records < kMinSplitRecords) {
      throw ConfigError("min_user_records must be >= 10 for the chronological split");
    }
    if (window > kMaxHistory) throw ConfigError("window must be <= 15");
    if (!flags.valid()) throw ConfigError("ablation flags disable every context source");
    if (!TemplateSet::by_name(template_set)) throw ConfigError("unknown template_set");
    validate_weights(weights);
  }

  PipelineOptions pipeline_options() const {
    PipelineOptions o;
    o.n = n;
    o.type_k = type_k;
    o.window = window;
    o.k = k;
    o.attempt_cap_factor = attempt_cap_factor;
    o.flags = flags;
    o.templates = *TemplateSet::by_name(template_set);
    o.workers = workers;
    return o;
  }

  PreprocessOptions preprocess_options() const {
    return {gap_seconds, {max_session_records, min_user_records}};
  }

  ReferenceOptions reference_options() const {
    ReferenceOptions r;
    r.weights = weights;
    r.templates = *TemplateSet::by_name(template_set);
    r.seed = seed;
    return r;
  }

  // Fingerprint of everything that shapes data, prompts and models. Ablation
  // flags, backend choice, worker count and output location are excluded.
  std::string hash() const {
    nlohmann::json j;
    std::vector<std::string> manifests;
    for (const auto& p : dataset_manifests) manifests.push_back(read_file(p));
    j["manifests"] = manifests;
    j["n"] = n;
    j["type_k"] = type_k;
    j["k"] = k;
    j["window"] = window;
    j["gap_seconds"] = gap_seconds;
    j["max_session_records"] = max_session_records;
    j["min_user_records"] = min_user_records;
    j["attempt_cap_factor"] = attempt_cap_factor;
    j["weights"] = weights;
    j["template_set"] = template_set;
    j["seed"] = seed;
    return text::hex64(text::fnv1a(j.dump()));
  }
};

// Reads a config file. Relative manifest paths and `out` resolve against
// the config file's directory.
inline RunConfig load_run_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config " + path.string() + " not found");
  const auto raw = read_file(path);
  const auto j = nlohmann::json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError(path.string() + " is not a JSON object");
  RunConfig c;
  const auto base = path.parent_path();
  try {
    for (const auto& d : j.value("datasets", nlohmann::json::array())) {
      c.dataset_manifests.push_back(base / d.get<std::string>());
    }
    c.n = j.value("n", c.n);
    c.type_k = j.value("type_k", c.type_k);
    c.k = j.value("k", c.k);
    c.window = j.value("window", c.window);
    c.gap_seconds = j.value("gap_seconds", c.gap_seconds);
    c.max_session_records = j.value("max_session_records", c.max_session_records);
    c.min_user_records = j.value("min_user_records", c.min_user_records);
    c.attempt_cap_factor = j.value("attempt_cap_factor", c.attempt_cap_factor);
    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      if (a.is_string()) {
        c.flags = parse_ablation_list(a.get<std::string>());
      } else {
        c.flags.use_stage1 = a.value("use_stage1", true);
        c.flags.use_app_history = a.value("use_app_history", true);
        c.flags.use_installed_apps = a.value("use_installed_apps", true);
        c.flags.use_optional_context = a.value("use_optional_context", true);
      }
    }
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      if (b.is_string()) {
        c.stage1_backend = c.stage2_backend = BackendSpec::parse(b.get<std::string>());
      } else {
        c.stage1_backend = BackendSpec::parse(b.value("stage1", std::string("reference")));
        c.stage2_backend = BackendSpec::parse(b.value("stage2", std::string("reference")));
      }
    }
    if (j.contains("weights")) c.weights = j.at("weights").get<InterpolationWeights>();
    c.template_set = j.value("template_set", c.template_set);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    if (j.contains("out")) c.out = base / j.at("out").get<std::string>();
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.retries = j.value("retries", c.retries);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return c;
}

}  // namespace nextapp
