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

// Renders structured context into fixed-grammar prompt sentences and parses
// generated sentences back. Every parser here is exact: it accepts a string
// only if rendering the parsed value reproduces it.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nextapp/clock.hpp"
#include "nextapp/corpus.hpp"
#include "nextapp/error.hpp"
#include "nextapp/text.hpp"
#include "nextapp/type_distribution.hpp"

namespace nextapp {

inline constexpr std::size_t kMaxHistory = 15;

// Category name -> apps of that category; categories render in name order.
using InstalledApps = std::map<std::string, std::vector<AppId>>;

struct ContextBundle {
  std::vector<AppId> app_history;             // oldest first
  std::vector<std::string> category_history;  // index-aligned with app_history
  std::optional<PredictionTime> time;
  std::optional<std::vector<std::string>> poi_labels;
  InstalledApps installed_apps;

  bool operator==(const ContextBundle&) const = default;
};

enum class PromptKind {
  kHistoryApps,
  kInstalledApps,
  kHistoryCategories,
  kPredictionTime,
  kPoi,
  kStage1Result,
  kStage2Target,
  kStage1Input,
  kStage2Input,
};

struct PromptSentence {
  std::string text;
  PromptKind kind = PromptKind::kStage1Input;

  bool operator==(const PromptSentence&) const = default;
};

enum class Stage : int { kAppType = 1, kNextApp = 2 };

struct AblationFlags {
  bool use_stage1 = true;
  bool use_app_history = true;
  bool use_installed_apps = true;
  bool use_optional_context = true;

  bool valid() const {
    return use_stage1 || use_app_history || use_installed_apps || use_optional_context;
  }
  bool operator==(const AblationFlags&) const = default;
};

// Surface phrasing of the context sentences. `canonical()` is the default;
// `recent_usage()` is an alternative phrasing with identical structure.
struct TemplateSet {
  std::string name;
  std::string history_prefix;
  std::string history_suffix;
  std::string poi_prefix;
  std::string poi_suffix;

  static TemplateSet canonical() {
    return {"canonical", "The apps ", " are used prior to the prediction.",
            "The user is close to ", "."};
  }
  static TemplateSet recent_usage() {
    return {"recent", "The user has recently used ", ".", "The user frequently visits ", "."};
  }
  static std::optional<TemplateSet> by_name(std::string_view n) {
    if (n == "canonical") return canonical();
    if (n == "recent") return recent_usage();
    return std::nullopt;
  }
  bool operator==(const TemplateSet&) const = default;
};

namespace templater {

inline constexpr std::string_view kStage1Prefix =
    "Based on the global information, the next app will be a ";
inline constexpr std::string_view kTargetPrefix = "This user will use App ";

// "a", "a and b", "a, b, and c"
inline std::string render_serial_list(const std::vector<std::string>& items) {
  if (items.size() == 1) return items[0];
  if (items.size() == 2) return items[0] + " and " + items[1];
  std::string out;
  for (std::size_t i = 0; i + 1 < items.size(); ++i) out += items[i] + ", ";
  return out + "and " + items.back();
}

// "a", "a and b", "a, b and c"
inline std::string render_plain_list(const std::vector<std::string>& items) {
  if (items.size() == 1) return items[0];
  std::string out;
  for (std::size_t i = 0; i + 2 < items.size(); ++i) out += items[i] + ", ";
  return out + items[items.size() - 2] + " and " + items.back();
}

inline std::vector<std::string> app_tokens(const std::vector<AppId>& apps) {
  std::vector<std::string> out;
  out.reserve(apps.size());
  for (auto a : apps) out.push_back(std::to_string(a));
  return out;
}

inline PromptSentence render_app_history(const std::vector<AppId>& apps,
                                         const TemplateSet& ts = TemplateSet::canonical()) {
  if (apps.empty()) throw ConfigError("cannot render an empty app history");
  return {ts.history_prefix + render_serial_list(app_tokens(apps)) + ts.history_suffix,
          PromptKind::kHistoryApps};
}

inline PromptSentence render_category_history(const std::vector<std::string>& categories,
                                              const TemplateSet& ts = TemplateSet::canonical()) {
  if (categories.empty()) throw ConfigError("cannot render an empty category history");
  return {ts.history_prefix + render_serial_list(categories) + ts.history_suffix,
          PromptKind::kHistoryCategories};
}

// "travel apps : 1,4,12 utility apps : 2,7,16"; categories with no apps are skipped.
inline PromptSentence render_installed(const InstalledApps& installed) {
  std::vector<std::string> blocks;
  for (const auto& [cat, apps] : installed) {
    if (apps.empty()) continue;
    blocks.push_back(cat + " apps : " + text::join(app_tokens(apps), ","));
  }
  return {text::join(blocks, " "), PromptKind::kInstalledApps};
}

// "On Tuesday 02 PM": zero-padded 12-hour clock.
inline PromptSentence render_time(const PredictionTime& t) {
  const int h12 = t.hour % 12 == 0 ? 12 : t.hour % 12;
  std::string hh = (h12 < 10 ? "0" : "") + std::to_string(h12);
  return {"On " + std::string(kWeekdayNames[static_cast<int>(t.weekday)]) + " " + hh +
              (t.hour < 12 ? " AM" : " PM"),
          PromptKind::kPredictionTime};
}

inline PromptSentence render_poi(const std::vector<std::string>& labels,
                                 const TemplateSet& ts = TemplateSet::canonical()) {
  if (labels.empty()) throw ConfigError("cannot render an empty place list");
  return {ts.poi_prefix + render_plain_list(labels) + ts.poi_suffix, PromptKind::kPoi};
}

inline PromptSentence render_type_result(const TypeDistribution& dist) {
  if (dist.entries.empty()) throw ConfigError("cannot render an empty type distribution");
  for (const auto& e : dist.entries) {
    if (e.percent <= 0) throw ConfigError("type distribution percentages must be positive");
  }
  std::string out(kStage1Prefix);
  for (std::size_t i = 0; i < dist.entries.size(); ++i) {
    if (i > 0) out += (i + 1 == dist.entries.size()) ? " or " : ", ";
    const auto& e = dist.entries[i];
    out += e.category + " app (" + std::to_string(e.percent) + "%)";
  }
  return {std::move(out), PromptKind::kStage1Result};
}

inline PromptSentence render_target(AppId app) {
  return {std::string(kTargetPrefix) + std::to_string(app) + ".", PromptKind::kStage2Target};
}

// Concatenates the enabled components in fixed order: history, installed
// apps (stage 2), time, places. The stage-1 result is appended separately.
inline PromptSentence render_context(const ContextBundle& b, Stage stage, const AblationFlags& flags,
                                     const TemplateSet& ts = TemplateSet::canonical()) {
  std::vector<std::string> parts;
  if (stage == Stage::kAppType) {
    if (!b.category_history.empty()) parts.push_back(render_category_history(b.category_history, ts).text);
  } else {
    if (flags.use_app_history && !b.app_history.empty()) {
      parts.push_back(render_app_history(b.app_history, ts).text);
    }
    if (flags.use_installed_apps) {
      auto installed = render_installed(b.installed_apps).text;
      if (!installed.empty()) parts.push_back(std::move(installed));
    }
  }
  if (b.time) parts.push_back(render_time(*b.time).text);
  if (flags.use_optional_context && b.poi_labels && !b.poi_labels->empty()) {
    parts.push_back(render_poi(*b.poi_labels, ts).text);
  }
  if (parts.empty()) throw ConfigError("empty prompt");
  return {text::join(parts, " "),
          stage == Stage::kAppType ? PromptKind::kStage1Input : PromptKind::kStage2Input};
}

// Appends the stage-1 result sentence to a stage-2 context prompt.
inline PromptSentence with_stage1_result(PromptSentence context, const PromptSentence& stage1) {
  if (!context.text.empty()) context.text += ' ';
  context.text += stage1.text;
  return context;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline bool is_label(std::string_view s) { return text::is_sanitized_label(s); }

inline std::optional<std::vector<std::string>> parse_serial_list(std::string_view s) {
  std::vector<std::string> items;
  if (s.find(", ") != std::string_view::npos) {
    auto parts = text::split(s, ", ");
    auto& last = parts.back();
    if (!last.starts_with("and ")) return std::nullopt;
    last.remove_prefix(4);
    for (auto p : parts) items.emplace_back(p);
  } else if (const auto pos = s.find(" and "); pos != std::string_view::npos) {
    items.emplace_back(s.substr(0, pos));
    items.emplace_back(s.substr(pos + 5));
  } else {
    items.emplace_back(s);
  }
  for (const auto& i : items) {
    if (!is_label(i)) return std::nullopt;
  }
  if (render_serial_list(items) != s) return std::nullopt;
  return items;
}

inline std::optional<std::vector<std::string>> parse_plain_list(std::string_view s) {
  std::vector<std::string> items;
  auto parts = text::split(s, ", ");
  const auto tail = parts.back();
  parts.pop_back();
  for (auto p : parts) items.emplace_back(p);
  if (const auto pos = tail.find(" and "); pos != std::string_view::npos) {
    items.emplace_back(tail.substr(0, pos));
    items.emplace_back(tail.substr(pos + 5));
  } else {
    items.emplace_back(tail);
  }
  for (const auto& i : items) {
    if (!is_label(i)) return std::nullopt;
  }
  if (render_plain_list(items) != s) return std::nullopt;
  return items;
}

inline std::optional<AppId> parse_app_token(std::string_view s) {
  if (!text::all_digits(s)) return std::nullopt;
  return text::parse_int<AppId>(s);
}

inline std::optional<std::vector<AppId>> parse_app_list(const std::vector<std::string>& tokens) {
  std::vector<AppId> apps;
  for (const auto& t : tokens) {
    const auto a = parse_app_token(t);
    if (!a || std::to_string(*a) != t) return std::nullopt;
    apps.push_back(*a);
  }
  return apps;
}

// Finds `suffix` at or after `start` where it is followed by a component
// separator or the end of input. Labels may contain periods, so a bare "."
// suffix is only terminal at a component boundary.
inline std::size_t find_terminal(std::string_view s, std::string_view suffix, std::size_t start) {
  std::size_t end = start;
  while (true) {
    end = s.find(suffix, end);
    if (end == std::string_view::npos) return end;
    const auto after = end + suffix.size();
    if (after == s.size() || s[after] == ' ') return end;
    ++end;
  }
}

// Reads one whitespace-free token at `pos`.
inline std::string_view token_at(std::string_view s, std::size_t pos) {
  const auto end = s.find(' ', pos);
  return s.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
}

}  // namespace detail

// Inverse of render_target. Tolerates surrounding whitespace and a missing
// final period; anything else is a parse failure.
inline std::optional<AppId> parse_prediction(std::string_view s) {
  s = text::trim(s);
  if (!s.starts_with(kTargetPrefix)) return std::nullopt;
  s.remove_prefix(kTargetPrefix.size());
  if (s.ends_with('.')) s.remove_suffix(1);
  return detail::parse_app_token(s);
}

// Inverse of render_type_result. Entries carry probability = percent / 100.
inline std::optional<TypeDistribution> parse_type_result(std::string_view s) {
  s = text::trim(s);
  if (!s.starts_with(kStage1Prefix)) return std::nullopt;
  std::string_view rest = s.substr(kStage1Prefix.size());
  TypeDistribution dist;
  while (!rest.empty()) {
    const auto app_pos = rest.find(" app (");
    if (app_pos == std::string_view::npos) return std::nullopt;
    const std::string category(rest.substr(0, app_pos));
    if (!detail::is_label(category)) return std::nullopt;
    rest.remove_prefix(app_pos + 6);
    const auto close = rest.find("%)");
    if (close == std::string_view::npos) return std::nullopt;
    const auto pct_text = rest.substr(0, close);
    if (!text::all_digits(pct_text)) return std::nullopt;
    const auto pct = text::parse_int<int>(pct_text);
    if (!pct || *pct <= 0 || *pct > 100) return std::nullopt;
    dist.entries.push_back({category, *pct / 100.0, *pct});
    rest.remove_prefix(close + 2);
    if (rest.starts_with(", ")) {
      rest.remove_prefix(2);
    } else if (rest.starts_with(" or ")) {
      rest.remove_prefix(4);
    } else if (!rest.empty()) {
      return std::nullopt;
    }
  }
  if (dist.entries.empty() || render_type_result(dist).text != s) return std::nullopt;
  return dist;
}

// A stage-1 or stage-2 input prompt decomposed into its components.
struct ParsedPrompt {
  ContextBundle bundle;
  bool has_installed = false;
  std::optional<TypeDistribution> stage1;

  bool operator==(const ParsedPrompt&) const = default;
};

// Inverse of render_context (plus the optional trailing stage-1 sentence for
// stage 2). Stage-1 history items are category names; stage-2 items are app ids.
inline std::optional<ParsedPrompt> parse_context(std::string_view s, Stage stage,
                                                 const TemplateSet& ts = TemplateSet::canonical()) {
  ParsedPrompt out;
  std::size_t pos = 0;
  const auto at = [&](std::string_view prefix) { return s.substr(pos).starts_with(prefix); };
  // Components are separated by exactly one space.
  const auto advance_separator = [&]() -> bool {
    if (pos == s.size()) return true;
    if (s[pos] != ' ') return false;
    ++pos;
    return pos < s.size();
  };

  // An installed block for a category named like the history prefix ("The
  // apps : 1,2") also starts here; labels never contain ':', so a failed
  // history parse falls through to the installed blocks.
  if (at(ts.history_prefix)) {
    const auto start = pos + ts.history_prefix.size();
    const auto end = detail::find_terminal(s, ts.history_suffix, start);
    const auto items = end == std::string_view::npos
                           ? std::nullopt
                           : detail::parse_serial_list(s.substr(start, end - start));
    if (items) {
      if (stage == Stage::kAppType) {
        out.bundle.category_history = *items;
      } else {
        const auto apps = detail::parse_app_list(*items);
        if (!apps) return std::nullopt;
        out.bundle.app_history = *apps;
      }
      pos = end + ts.history_suffix.size();
      if (!advance_separator()) return std::nullopt;
    }
  }

  if (stage == Stage::kNextApp) {
    // "<category> apps : <id>,<id>" blocks.
    while (pos < s.size()) {
      const auto cat = detail::token_at(s, pos);
      const auto marker_pos = pos + cat.size();
      if (!s.substr(marker_pos).starts_with(" apps : ") || !detail::is_label(cat)) break;
      const auto ids_pos = marker_pos + 8;
      const auto ids = detail::token_at(s, ids_pos);
      std::vector<std::string> tokens;
      for (auto t : text::split(ids, ",")) tokens.emplace_back(t);
      const auto apps = detail::parse_app_list(tokens);
      if (!apps || apps->empty()) return std::nullopt;
      if (out.bundle.installed_apps.contains(std::string(cat))) return std::nullopt;
      out.bundle.installed_apps.emplace(std::string(cat), *apps);
      out.has_installed = true;
      pos = ids_pos + ids.size();
      if (!advance_separator()) return std::nullopt;
    }
  }

  if (at("On ")) {
    const auto day = detail::token_at(s, pos + 3);
    int wd = -1;
    for (int i = 0; i < 7; ++i) {
      if (kWeekdayNames[i] == day) wd = i;
    }
    if (wd < 0) return std::nullopt;
    const auto hh_pos = pos + 3 + day.size() + 1;
    if (hh_pos + 5 > s.size()) return std::nullopt;
    const auto hh = s.substr(hh_pos, 2);
    const auto ampm = s.substr(hh_pos + 2, 3);
    const auto h12 = text::all_digits(hh) ? text::parse_int<int>(hh) : std::nullopt;
    if (!h12 || *h12 < 1 || *h12 > 12 || (ampm != " AM" && ampm != " PM")) return std::nullopt;
    const int hour = (*h12 % 12) + (ampm == " PM" ? 12 : 0);
    out.bundle.time = PredictionTime{static_cast<Weekday>(wd), hour};
    if (render_time(*out.bundle.time).text != s.substr(pos, hh_pos + 5 - pos)) return std::nullopt;
    pos = hh_pos + 5;
    if (!advance_separator()) return std::nullopt;
  }

  if (at(ts.poi_prefix) && !at(kStage1Prefix)) {
    const auto start = pos + ts.poi_prefix.size();
    const auto end = detail::find_terminal(s, ts.poi_suffix, start);
    if (end == std::string_view::npos) return std::nullopt;
    const auto labels = detail::parse_plain_list(s.substr(start, end - start));
    if (!labels) return std::nullopt;
    out.bundle.poi_labels = *labels;
    pos = end + ts.poi_suffix.size();
    if (!advance_separator()) return std::nullopt;
  }

  if (stage == Stage::kNextApp && at(kStage1Prefix)) {
    auto dist = parse_type_result(s.substr(pos));
    if (!dist) return std::nullopt;
    out.stage1 = std::move(dist);
    pos = s.size();
  }

  if (pos != s.size()) return std::nullopt;
  return out;
}

}  // namespace templater
}  // namespace nextapp
