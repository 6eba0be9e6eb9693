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
#include <string>
#include <vector>

namespace nextapp {

// Ranked next-category distribution for one category-sequence key.
struct TypeDistribution {
  struct Entry {
    std::string category;
    double probability = 0.0;
    int percent = 0;  // rendered integer percentage

    bool operator==(const Entry&) const = default;
  };

  std::vector<std::string> key;  // preceding categories, oldest first
  std::vector<Entry> entries;    // probability descending, ties by name
  std::uint64_t support_count = 0;

  bool operator==(const TypeDistribution&) const = default;
};

// True when both render to the same sentence (category and percent match).
inline bool same_rendering(const TypeDistribution& a, const TypeDistribution& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    if (a.entries[i].category != b.entries[i].category ||
        a.entries[i].percent != b.entries[i].percent) {
      return false;
    }
  }
  return true;
}

}  // namespace nextapp
