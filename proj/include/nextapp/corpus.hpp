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

// Usage-log ingestion: parsing, session segmentation, noise filtering and
// chronological per-user splitting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nextapp/clock.hpp"
#include "nextapp/error.hpp"
#include "nextapp/text.hpp"

namespace nextapp {

using AppId = std::uint32_t;
using CategoryId = std::uint32_t;

struct UsageRecord {
  std::string user_id;
  Timestamp timestamp = 0;
  AppId app_id = 0;
  CategoryId category_id = 0;
  std::optional<std::vector<std::string>> poi_labels;

  bool operator==(const UsageRecord&) const = default;
};

// Dataset-scoped canonical ids. App ids and category ids are dense and
// assigned in first-seen order.
class Vocab {
 public:
  // Returns nullopt when the app was already seen under another category.
  std::optional<AppId> intern_app(const std::string& app_name, const std::string& category_name) {
    const CategoryId cat = intern_category(category_name);
    if (const auto it = app_ids_.find(app_name); it != app_ids_.end()) {
      if (app_category_[it->second] != cat) return std::nullopt;
      return it->second;
    }
    const auto id = static_cast<AppId>(app_names_.size());
    app_ids_.emplace(app_name, id);
    app_names_.push_back(app_name);
    app_category_.push_back(cat);
    return id;
  }

  CategoryId intern_category(const std::string& name) {
    if (const auto it = category_ids_.find(name); it != category_ids_.end()) return it->second;
    const auto id = static_cast<CategoryId>(category_names_.size());
    category_ids_.emplace(name, id);
    category_names_.push_back(name);
    return id;
  }

  void add_poi(const std::string& label) { poi_labels_.insert(label); }

  std::optional<AppId> app_id(const std::string& name) const {
    const auto it = app_ids_.find(name);
    if (it == app_ids_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<CategoryId> category_id(const std::string& name) const {
    const auto it = category_ids_.find(name);
    if (it == category_ids_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& app_name(AppId id) const { return app_names_.at(id); }
  CategoryId category_of(AppId id) const { return app_category_.at(id); }
  const std::string& category_name(CategoryId id) const { return category_names_.at(id); }
  const std::string& category_name_of_app(AppId id) const {
    return category_name(category_of(id));
  }

  std::size_t app_count() const { return app_names_.size(); }
  std::size_t category_count() const { return category_names_.size(); }
  const std::set<std::string>& poi_labels() const { return poi_labels_; }

  bool contains(const UsageRecord& r) const {
    return r.app_id < app_names_.size() && r.category_id < category_names_.size() &&
           app_category_[r.app_id] == r.category_id;
  }

  bool operator==(const Vocab& o) const {
    return app_names_ == o.app_names_ && app_category_ == o.app_category_ &&
           category_names_ == o.category_names_ && poi_labels_ == o.poi_labels_;
  }

 private:
  std::unordered_map<std::string, AppId> app_ids_;
  std::vector<std::string> app_names_;
  std::vector<CategoryId> app_category_;
  std::unordered_map<std::string, CategoryId> category_ids_;
  std::vector<std::string> category_names_;
  std::set<std::string> poi_labels_;
};

enum class TimestampFormat { kEpochSeconds, kIso8601 };

// Column layout of a delimited usage log. Columns are located by header name.
struct LogFormat {
  char delimiter = ',';
  std::string user_column = "user";
  std::string timestamp_column = "timestamp";
  std::string app_column = "app";
  std::string category_column = "category";
  std::string poi_column;  // empty: the log carries no place labels
  TimestampFormat timestamp_format = TimestampFormat::kEpochSeconds;
  char poi_separator = ';';
  double max_reject_ratio = 0.01;
};

struct Reject {
  std::size_t line_number = 0;  // 1-based, header is line 1
  std::string reason;
  std::string line;
};

struct ParseResult {
  std::vector<UsageRecord> records;
  std::vector<Reject> rejects;
  std::size_t data_lines = 0;
};

namespace detail {

struct ColumnIndex {
  std::size_t user, timestamp, app, category;
  std::optional<std::size_t> poi;
};

inline ColumnIndex resolve_columns(const std::vector<std::string>& header, const LogFormat& fmt) {
  const auto find = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (text::trim(header[i]) == name) return i;
    }
    throw ConfigError("log header has no column named '" + name + "'");
  };
  ColumnIndex idx{find(fmt.user_column), find(fmt.timestamp_column), find(fmt.app_column),
                  find(fmt.category_column), std::nullopt};
  if (!fmt.poi_column.empty()) idx.poi = find(fmt.poi_column);
  return idx;
}

}  // namespace detail

// Parses a delimited usage log with a header row. Malformed lines are
// collected in `rejects`; exceeding `fmt.max_reject_ratio` throws DataError.
inline ParseResult parse_log(std::istream& in, const LogFormat& fmt, Vocab& vocab) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  std::optional<detail::ColumnIndex> cols;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!cols) {
      if (text::trim(line).empty()) continue;
      auto header = text::split_delimited(line, fmt.delimiter);
      if (!header) throw ConfigError("unterminated quote in log header");
      cols = detail::resolve_columns(*header, fmt);
      continue;
    }
    if (text::trim(line).empty()) continue;
    ++result.data_lines;

    const auto reject = [&](std::string reason) {
      result.rejects.push_back({line_no, std::move(reason), line});
    };
    auto fields = text::split_delimited(line, fmt.delimiter);
    if (!fields) {
      reject("unterminated quote");
      continue;
    }
    // The optional place column may be absent on a line; the others may not.
    const std::size_t needed = std::max({cols->user, cols->timestamp, cols->app, cols->category});
    if (fields->size() <= needed) {
      reject("expected at least " + std::to_string(needed + 1) + " fields");
      continue;
    }

    const std::string user(text::trim((*fields)[cols->user]));
    if (user.empty() || user.find('\t') != std::string::npos) {
      reject("empty or invalid user id");
      continue;
    }
    const auto ts_field = text::trim((*fields)[cols->timestamp]);
    std::optional<Timestamp> ts;
    if (fmt.timestamp_format == TimestampFormat::kEpochSeconds) {
      ts = text::parse_int<Timestamp>(ts_field);
    } else {
      ts = clock::parse_iso8601(ts_field);
    }
    if (!ts) {
      reject("non-numeric or malformed timestamp");
      continue;
    }
    if (*ts < 0) {
      reject("negative timestamp");
      continue;
    }
    const std::string app(text::trim((*fields)[cols->app]));
    const std::string category = text::sanitize_label((*fields)[cols->category]);
    if (app.empty() || category.empty() || app.find('\t') != std::string::npos) {
      reject("empty or invalid app or category");
      continue;
    }
    std::optional<std::vector<std::string>> pois;
    if (cols->poi && *cols->poi < fields->size()) {
      std::vector<std::string> labels;
      for (auto part : text::split((*fields)[*cols->poi], std::string_view(&fmt.poi_separator, 1))) {
        auto label = text::sanitize_label(part);
        if (!label.empty()) labels.push_back(std::move(label));
      }
      if (!labels.empty()) pois = std::move(labels);
    }
    // Check the category before interning so a rejected line leaves no trace.
    if (const auto known = vocab.app_id(app)) {
      if (vocab.category_name_of_app(*known) != category) {
        reject("app '" + app + "' already mapped to category '" +
               vocab.category_name_of_app(*known) + "'");
        continue;
      }
    }
    const AppId app_id = *vocab.intern_app(app, category);
    if (pois) {
      for (const auto& l : *pois) vocab.add_poi(l);
    }
    result.records.push_back({user, *ts, app_id, vocab.category_of(app_id), std::move(pois)});
  }

  if (result.data_lines > 0 &&
      static_cast<double>(result.rejects.size()) >
          fmt.max_reject_ratio * static_cast<double>(result.data_lines)) {
    throw DataError("rejected " + std::to_string(result.rejects.size()) + " of " +
                    std::to_string(result.data_lines) + " lines (first: line " +
                    std::to_string(result.rejects.front().line_number) + ": " +
                    result.rejects.front().reason + ")");
  }
  return result;
}

struct Session {
  std::string user_id;
  std::vector<UsageRecord> records;
  std::size_t session_index = 0;

  bool operator==(const Session&) const = default;
};

inline constexpr Timestamp kDefaultSessionGap = 300;

// Groups records by user (ordered by user id); each user's records are
// stably sorted by timestamp so ties keep input order.
inline std::map<std::string, std::vector<UsageRecord>> group_by_user(
    std::span<const UsageRecord> records) {
  std::map<std::string, std::vector<UsageRecord>> users;
  for (const auto& r : records) users[r.user_id].push_back(r);
  for (auto& [_, rs] : users) {
    std::stable_sort(rs.begin(), rs.end(), [](const UsageRecord& a, const UsageRecord& b) {
      return a.timestamp < b.timestamp;
    });
  }
  return users;
}

// Splits one user's time-ordered records into sessions. A new session starts
// exactly when the gap to the previous record is strictly greater than `gap`.
inline std::vector<Session> sessionize(std::span<const UsageRecord> records,
                                       Timestamp gap = kDefaultSessionGap) {
  std::vector<Session> sessions;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i == 0 || records[i].timestamp - records[i - 1].timestamp > gap) {
      sessions.push_back({records[i].user_id, {}, sessions.size()});
    }
    sessions.back().records.push_back(records[i]);
  }
  return sessions;
}

struct FilterLimits {
  std::size_t max_session_records = 5000;  // larger sessions are dropped
  std::size_t min_user_records = 10;       // users below this are dropped
};

// Drops sessions with more than `max_session_records` records, then drops
// every user whose remaining record count is below `min_user_records`.
inline std::vector<Session> filter_noise(std::span<const Session> sessions,
                                         const FilterLimits& limits = {}) {
  std::vector<const Session*> kept;
  std::map<std::string, std::size_t> per_user;
  for (const auto& s : sessions) {
    if (s.records.size() > limits.max_session_records) continue;
    kept.push_back(&s);
    per_user[s.user_id] += s.records.size();
  }
  std::vector<Session> out;
  for (const Session* s : kept) {
    if (per_user[s->user_id] >= limits.min_user_records) out.push_back(*s);
  }
  return out;
}

struct UserSplit {
  std::string user_id;
  std::vector<UsageRecord> train;
  std::vector<UsageRecord> validation;
  std::vector<UsageRecord> test;

  std::size_t size() const { return train.size() + validation.size() + test.size(); }
  bool operator==(const UserSplit&) const = default;
};

struct SplitSizes {
  std::size_t train, validation, test;
  bool operator==(const SplitSizes&) const = default;
};

inline constexpr std::size_t kMinSplitRecords = 10;

// floor(0.7 n), floor(0.1 n), remainder. Integer arithmetic avoids 0.7*n
// rounding below an exact integer.
inline SplitSizes split_sizes(std::size_t n) {
  const std::size_t train = n * 7 / 10;
  const std::size_t validation = n / 10;
  return {train, validation, n - train - validation};
}

// Chronological 70/10/20 split of one user's records.
inline UserSplit split_chronological(const std::string& user_id,
                                     std::vector<UsageRecord> records) {
  if (records.size() < kMinSplitRecords) {
    throw DataError("user '" + user_id + "' has " + std::to_string(records.size()) +
                    " records; at least 10 are required for a split");
  }
  std::stable_sort(records.begin(), records.end(), [](const UsageRecord& a, const UsageRecord& b) {
    return a.timestamp < b.timestamp;
  });
  const auto sizes = split_sizes(records.size());
  UserSplit split{user_id, {}, {}, {}};
  const auto b = records.begin();
  const auto t = static_cast<std::ptrdiff_t>(sizes.train);
  const auto v = static_cast<std::ptrdiff_t>(sizes.validation);
  split.train.assign(std::make_move_iterator(b), std::make_move_iterator(b + t));
  split.validation.assign(std::make_move_iterator(b + t), std::make_move_iterator(b + t + v));
  split.test.assign(std::make_move_iterator(b + t + v), std::make_move_iterator(records.end()));
  return split;
}

struct SplitCorpus {
  std::string dataset_id;
  Vocab vocab;
  std::vector<UserSplit> users;  // ordered by user_id

  bool operator==(const SplitCorpus&) const = default;
};

struct PreprocessOptions {
  Timestamp gap_seconds = kDefaultSessionGap;
  FilterLimits limits;
};

struct PreprocessStats {
  std::size_t input_records = 0;
  std::size_t sessions = 0;
  std::size_t dropped_sessions = 0;
  std::size_t dropped_users = 0;
  std::size_t kept_records = 0;
};

// group_by_user -> sessionize -> filter_noise -> split_chronological.
inline SplitCorpus preprocess(std::string dataset_id, Vocab vocab,
                              std::span<const UsageRecord> records,
                              const PreprocessOptions& opts = {},
                              PreprocessStats* stats = nullptr) {
  SplitCorpus corpus{std::move(dataset_id), std::move(vocab), {}};
  PreprocessStats local;
  local.input_records = records.size();
  const auto users = group_by_user(records);
  std::vector<Session> all;
  for (const auto& [_, rs] : users) {
    auto sessions = sessionize(rs, opts.gap_seconds);
    for (auto& s : sessions) all.push_back(std::move(s));
  }
  local.sessions = all.size();
  const auto filtered = filter_noise(all, opts.limits);

  std::map<std::string, std::vector<UsageRecord>> kept;
  for (const auto& s : filtered) {
    auto& dst = kept[s.user_id];
    dst.insert(dst.end(), s.records.begin(), s.records.end());
  }
  for (auto& [user, rs] : kept) {
    local.kept_records += rs.size();
    corpus.users.push_back(split_chronological(user, std::move(rs)));
  }
  std::size_t sessions_of_kept = 0;
  for (const auto& s : all) {
    if (s.records.size() <= opts.limits.max_session_records && kept.contains(s.user_id)) {
      ++sessions_of_kept;
    }
  }
  local.dropped_sessions = all.size() - sessions_of_kept;
  local.dropped_users = users.size() - kept.size();
  if (stats) *stats = local;
  return corpus;
}

// One user's full chronological stream (train, then validation, then test).
inline std::vector<UsageRecord> full_stream(const UserSplit& u) {
  std::vector<UsageRecord> out;
  out.reserve(u.size());
  out.insert(out.end(), u.train.begin(), u.train.end());
  out.insert(out.end(), u.validation.begin(), u.validation.end());
  out.insert(out.end(), u.test.begin(), u.test.end());
  return out;
}

}  // namespace nextapp
