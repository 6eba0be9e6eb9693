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

// Synthetic usage logs: per-user second-order Markov app processes with
// session structure, time stamps and place labels. Deterministic per seed and
// independent of the standard library's distribution implementations.

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nextapp/error.hpp"

namespace nextapp::synthetic {

struct MarkovSpec {
  std::size_t users = 20;
  std::size_t events_per_user = 250;
  std::size_t apps = 30;
  std::size_t categories = 6;
  std::size_t apps_per_user = 12;
  double dominant_probability = 0.6;  // P(most likely successor)
  double second_probability = 0.25;   // P(second successor); rest uniform
  double session_break_probability = 0.1;
  std::int64_t start_time = 1'600'000'000;
  std::uint64_t seed = 7;
};

inline const std::vector<std::string>& category_names() {
  static const std::vector<std::string> names = {"Communication", "Social",  "Travel",
                                                 "Utilities",     "Photo/Video", "Games",
                                                 "Music",         "Shopping"};
  return names;
}

inline const std::vector<std::string>& place_names() {
  static const std::vector<std::string> names = {"home",    "work",      "shopping",
                                                 "service", "restaurants", "transport"};
  return names;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(index(static_cast<std::size_t>(hi - lo + 1)));
  }

 private:
  std::mt19937_64 engine_;
};

inline std::string app_name(std::size_t a) { return "app" + std::to_string(a); }

inline std::string category_of(std::size_t app, const MarkovSpec& spec) {
  return category_names().at(app % spec.categories);
}

// CSV with header "user,timestamp,app,category,poi".
inline std::string markov_log(const MarkovSpec& spec) {
  if (spec.categories > category_names().size() || spec.apps_per_user > spec.apps ||
      spec.apps_per_user < 2) {
    throw ConfigError("unsupported synthetic corpus shape");
  }
  Rng rng(spec.seed);
  std::ostringstream out;
  out << "user,timestamp,app,category,poi\n";
  for (std::size_t u = 0; u < spec.users; ++u) {
    // App subset for this user.
    std::vector<std::size_t> all(spec.apps);
    for (std::size_t i = 0; i < spec.apps; ++i) all[i] = i;
    for (std::size_t i = 0; i < spec.apps_per_user; ++i) std::swap(all[i], all[i + rng.index(spec.apps - i)]);
    const std::vector<std::size_t> apps(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(spec.apps_per_user));
    const std::size_t m = apps.size();

    // Successor table over (previous, current) index pairs.
    std::vector<std::pair<std::size_t, std::size_t>> succ(m * m);
    for (auto& s : succ) {
      s.first = rng.index(m);
      s.second = (s.first + 1 + rng.index(m - 1)) % m;
    }
    const std::size_t home = rng.index(place_names().size());
    const std::size_t work = (home + 1 + rng.index(place_names().size() - 1)) % place_names().size();

    char id[16];
    std::snprintf(id, sizeof id, "u%03zu", u);
    std::int64_t t = spec.start_time + static_cast<std::int64_t>(u) * 7919;
    std::size_t prev = rng.index(m);
    std::size_t cur = rng.index(m);
    std::string place = place_names()[home];
    for (std::size_t e = 0; e < spec.events_per_user; ++e) {
      if (e > 0) {
        if (rng.unit() < spec.session_break_probability) {
          t += rng.between(1200, 20000);
          const double p = rng.unit();
          place = p < 0.5 ? place_names()[home]
                          : p < 0.8 ? place_names()[work] : place_names()[rng.index(place_names().size())];
        } else {
          t += rng.between(5, 240);
        }
        const auto& s = succ[prev * m + cur];
        const double x = rng.unit();
        std::size_t next;
        if (x < spec.dominant_probability) {
          next = s.first;
        } else if (x < spec.dominant_probability + spec.second_probability) {
          next = s.second;
        } else {
          next = rng.index(m);
        }
        prev = cur;
        cur = next;
      }
      const auto a = apps[cur];
      out << id << ',' << t << ',' << app_name(a) << ',' << category_of(a, spec) << ',' << place << '\n';
    }
  }
  return out.str();
}

}  // namespace nextapp::synthetic
