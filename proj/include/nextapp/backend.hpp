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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nextapp/error.hpp"
#include "nextapp/templater.hpp"

namespace nextapp {

struct GenerationRequest {
  std::uint64_t request_id = 0;
  std::string prompt;
  std::size_t num_candidates = 1;
  Stage stage = Stage::kNextApp;
};

struct Candidate {
  std::string text;
  double score = 0.0;  // higher is better

  bool operator==(const Candidate&) const = default;
};

inline void validate(const GenerationRequest& r) {
  if (r.prompt.empty()) throw ConfigError("generation request has an empty prompt");
  if (r.num_candidates < 1) throw ConfigError("generation request asks for zero candidates");
}

// Orders candidates by score descending, ties by text ascending.
inline void sort_candidates(std::vector<Candidate>& cs) {
  std::stable_sort(cs.begin(), cs.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.text < b.text;
  });
}

// Text-to-text generator shared by the reference model and external backends.
class Predictor {
 public:
  virtual ~Predictor() = default;

  // At most `request.num_candidates` candidates, best first. Throws
  // TransportError when the backend cannot be reached in time.
  virtual std::vector<Candidate> generate(const GenerationRequest& request) = 0;

  virtual std::string name() const = 0;
};

}  // namespace nextapp
