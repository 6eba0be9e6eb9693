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

// maple-backend/1 frames: newline-delimited JSON, one frame per line.
//
//   handshake (backend -> client, first line)
//       {"protocol": "maple-backend/1", "name": string}
//   request   (client -> backend)
//       {"id": int, "stage": 1|2, "prompt": string, "n": int}
//   response  (backend -> client)
//       {"id": int, "candidates": [{"text": string, "score": float}, ...]}
//   error     (backend -> client)
//       {"id": int, "error": string}

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nextapp/backend.hpp"
#include "nextapp/error.hpp"

namespace nextapp::protocol {

inline constexpr std::string_view kProtocolVersion = "maple-backend/1";

struct Handshake {
  std::string name;
};

struct Response {
  std::uint64_t id = 0;
  std::vector<Candidate> candidates;
};

struct ErrorFrame {
  std::uint64_t id = 0;
  std::string message;
};

using BackendFrame = std::variant<Response, ErrorFrame>;

inline std::string encode_request(const GenerationRequest& r) {
  return nlohmann::json{{"id", r.request_id},
                        {"stage", static_cast<int>(r.stage)},
                        {"prompt", r.prompt},
                        {"n", r.num_candidates}}
      .dump();
}

inline std::string encode_handshake(const Handshake& h) {
  return nlohmann::json{{"protocol", kProtocolVersion}, {"name", h.name}}.dump();
}

inline std::string encode_response(const Response& r) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : r.candidates) cands.push_back({{"text", c.text}, {"score", c.score}});
  return nlohmann::json{{"id", r.id}, {"candidates", cands}}.dump();
}

inline std::string encode_error(const ErrorFrame& e) {
  return nlohmann::json{{"id", e.id}, {"error", e.message}}.dump();
}

namespace detail {

inline nlohmann::json parse_object(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProtocolError("frame is not a JSON object", std::string(line));
  }
  return j;
}

inline std::uint64_t frame_id(const nlohmann::json& j, std::string_view line) {
  const auto it = j.find("id");
  if (it == j.end() || !it->is_number_integer() || it->get<std::int64_t>() < 0) {
    throw ProtocolError("frame has no non-negative integer id", std::string(line));
  }
  return it->get<std::uint64_t>();
}

}  // namespace detail

inline Handshake decode_handshake(std::string_view line) {
  const auto j = detail::parse_object(line);
  const auto p = j.find("protocol");
  if (p == j.end() || !p->is_string() || p->get<std::string>() != kProtocolVersion) {
    throw ProtocolError("unsupported or missing protocol version", std::string(line));
  }
  const auto n = j.find("name");
  if (n == j.end() || !n->is_string()) {
    throw ProtocolError("handshake has no backend name", std::string(line));
  }
  return {n->get<std::string>()};
}

inline GenerationRequest decode_request(std::string_view line) {
  const auto j = detail::parse_object(line);
  GenerationRequest r;
  r.request_id = detail::frame_id(j, line);
  const auto stage = j.find("stage");
  const auto prompt = j.find("prompt");
  const auto n = j.find("n");
  if (stage == j.end() || !stage->is_number_integer() ||
      (stage->get<int>() != 1 && stage->get<int>() != 2)) {
    throw ProtocolError("request stage must be 1 or 2", std::string(line));
  }
  if (prompt == j.end() || !prompt->is_string() || prompt->get<std::string>().empty()) {
    throw ProtocolError("request prompt must be a non-empty string", std::string(line));
  }
  if (n == j.end() || !n->is_number_integer() || n->get<std::int64_t>() < 1) {
    throw ProtocolError("request n must be a positive integer", std::string(line));
  }
  r.stage = static_cast<Stage>(stage->get<int>());
  r.prompt = prompt->get<std::string>();
  r.num_candidates = n->get<std::size_t>();
  return r;
}

inline BackendFrame decode_backend_frame(std::string_view line) {
  const auto j = detail::parse_object(line);
  const auto id = detail::frame_id(j, line);
  if (const auto e = j.find("error"); e != j.end()) {
    if (!e->is_string()) throw ProtocolError("error field must be a string", std::string(line));
    return ErrorFrame{id, e->get<std::string>()};
  }
  const auto cands = j.find("candidates");
  if (cands == j.end() || !cands->is_array()) {
    throw ProtocolError("response has no candidates array", std::string(line));
  }
  Response r{id, {}};
  for (const auto& c : *cands) {
    if (!c.is_object()) throw ProtocolError("candidate is not an object", std::string(line));
    const auto t = c.find("text");
    const auto s = c.find("score");
    if (t == c.end() || !t->is_string() || s == c.end() || !s->is_number()) {
      throw ProtocolError("candidate needs string text and numeric score", std::string(line));
    }
    const double score = s->get<double>();
    if (!std::isfinite(score)) throw ProtocolError("candidate score is not finite", std::string(line));
    r.candidates.push_back({t->get<std::string>(), score});
  }
  return r;
}

}  // namespace nextapp::protocol
