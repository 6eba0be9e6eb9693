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

#include <cstdint>
#include <optional>
#include <string_view>

#include "nextapp/text.hpp"

namespace nextapp {

using Timestamp = std::int64_t;

// Day of week, Monday first.
enum class Weekday : int { kMonday = 0, kTuesday, kWednesday, kThursday, kFriday, kSaturday, kSunday };

inline constexpr std::string_view kWeekdayNames[] = {"Monday", "Tuesday", "Wednesday", "Thursday",
                                                     "Friday", "Saturday", "Sunday"};

struct PredictionTime {
  Weekday weekday = Weekday::kMonday;
  int hour = 0;  // 0..23

  bool operator==(const PredictionTime&) const = default;
  auto operator<=>(const PredictionTime&) const = default;
};

namespace clock {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2 ? 1 : 0;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline PredictionTime local_time(Timestamp ts, std::int64_t utc_offset_seconds = 0) {
  constexpr std::int64_t kDay = 86400;
  const std::int64_t t = ts + utc_offset_seconds;
  std::int64_t days = t / kDay;
  std::int64_t secs = t % kDay;
  if (secs < 0) {
    secs += kDay;
    --days;
  }
  // 1970-01-01 was a Thursday.
  std::int64_t wd = (days + 3) % 7;
  if (wd < 0) wd += 7;
  return {static_cast<Weekday>(wd), static_cast<int>(secs / 3600)};
}

// Accepts "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DDTHH:MM:SS", interpreted as UTC.
inline std::optional<Timestamp> parse_iso8601(std::string_view s) {
  s = text::trim(s);
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != ' ' && s[10] != 'T') ||
      s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  const auto y = text::parse_int<std::int64_t>(s.substr(0, 4));
  const auto mo = text::parse_int<unsigned>(s.substr(5, 2));
  const auto d = text::parse_int<unsigned>(s.substr(8, 2));
  const auto h = text::parse_int<unsigned>(s.substr(11, 2));
  const auto mi = text::parse_int<unsigned>(s.substr(14, 2));
  const auto se = text::parse_int<unsigned>(s.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;
  if (*mo < 1 || *mo > 12 || *d < 1 || *d > 31 || *h > 23 || *mi > 59 || *se > 60) {
    return std::nullopt;
  }
  return days_from_civil(*y, *mo, *d) * 86400 + *h * 3600 + *mi * 60 + *se;
}

}  // namespace clock
}  // namespace nextapp
