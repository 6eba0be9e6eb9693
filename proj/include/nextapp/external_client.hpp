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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "nextapp/backend.hpp"
#include "nextapp/error.hpp"
#include "nextapp/protocol.hpp"
#include "nextapp/transport.hpp"

namespace nextapp {

struct ClientOptions {
  std::chrono::milliseconds timeout{30000};
  std::size_t max_in_flight = 32;
  std::size_t retries = 2;  // extra attempts after a transport error
};

// Client for an external backend speaking maple-backend/1. Many requests may
// be in flight at once over one connection; responses are matched by id and
// may arrive in any order.
class ExternalClient final : public Predictor {
 public:
  ExternalClient(std::unique_ptr<LineTransport> transport, ClientOptions opts = {})
      : transport_(std::move(transport)), opts_(opts), window_(static_cast<std::ptrdiff_t>(
                                                           std::max<std::size_t>(opts.max_in_flight, 1))) {
    if (opts_.max_in_flight > kMaxWindow) throw ConfigError("in-flight window too large");
    const auto first = transport_->read_line(opts_.timeout);
    if (first.status == ReadResult::Status::kTimeout) {
      transport_->close();
      throw TransportError("backend sent no handshake within the timeout");
    }
    if (first.status == ReadResult::Status::kEof) {
      transport_->close();
      throw TransportError("backend closed the stream before the handshake");
    }
    try {
      name_ = protocol::decode_handshake(first.line).name;
    } catch (...) {
      transport_->close();
      throw;
    }
    reader_ = std::thread([this] { reader_loop(); });
  }

  ~ExternalClient() override {
    stop_.store(true);
    if (reader_.joinable()) reader_.join();
    transport_->close();
  }

  ExternalClient(const ExternalClient&) = delete;
  ExternalClient& operator=(const ExternalClient&) = delete;

  // Sends one request with the caller's id and waits for its response.
  std::vector<Candidate> round_trip(const GenerationRequest& request) {
    validate(request);
    window_.acquire();
    struct Release {
      std::counting_semaphore<kMaxWindow>& s;
      ~Release() { s.release(); }
    } release{window_};

    std::future<std::vector<Candidate>> fut;
    {
      std::lock_guard lock(mu_);
      if (broken_) std::rethrow_exception(broken_);
      if (pending_.contains(request.request_id)) {
        throw ConfigError("request id " + std::to_string(request.request_id) +
                          " is already in flight");
      }
      abandoned_.erase(request.request_id);
      fut = pending_[request.request_id].get_future();
    }
    try {
      transport_->write_line(protocol::encode_request(request));
    } catch (...) {
      std::lock_guard lock(mu_);
      pending_.erase(request.request_id);
      throw;
    }
    if (fut.wait_for(opts_.timeout) != std::future_status::ready) {
      std::lock_guard lock(mu_);
      if (pending_.erase(request.request_id) > 0) {
        abandoned_.insert(request.request_id);
        throw TransportError("request " + std::to_string(request.request_id) + " timed out");
      }
    }
    auto candidates = fut.get();
    sort_candidates(candidates);
    if (candidates.size() > request.num_candidates) candidates.resize(request.num_candidates);
    return candidates;
  }

  // Assigns a fresh id per attempt and retries transport errors.
  std::vector<Candidate> generate(const GenerationRequest& request) override {
    for (std::size_t attempt = 0;; ++attempt) {
      GenerationRequest r = request;
      r.request_id = next_id_.fetch_add(1);
      try {
        return round_trip(r);
      } catch (const TransportError&) {
        if (attempt >= opts_.retries) throw;
      }
    }
  }

  std::string name() const override { return name_; }

 private:
  static constexpr std::ptrdiff_t kMaxWindow = 4096;

  void fail_all(std::exception_ptr e) {
    std::lock_guard lock(mu_);
    if (!broken_) broken_ = e;
    for (auto& [_, p] : pending_) p.set_exception(e);
    pending_.clear();
  }

  void reader_loop() {
    while (!stop_.load()) {
      ReadResult r;
      try {
        r = transport_->read_line(std::chrono::milliseconds(100));
      } catch (...) {
        fail_all(std::current_exception());
        return;
      }
      if (r.status == ReadResult::Status::kTimeout) continue;
      if (r.status == ReadResult::Status::kEof) {
        fail_all(std::make_exception_ptr(TransportError("backend closed the connection")));
        return;
      }
      protocol::BackendFrame frame;
      try {
        frame = protocol::decode_backend_frame(r.line);
      } catch (...) {
        fail_all(std::current_exception());
        return;
      }
      const std::uint64_t id = std::visit([](const auto& f) { return f.id; }, frame);
      std::lock_guard lock(mu_);
      const auto it = pending_.find(id);
      if (it == pending_.end()) {
        if (abandoned_.erase(id) > 0) continue;  // late answer to a timed-out request
        const auto e = std::make_exception_ptr(
            ProtocolError("response for unknown request id " + std::to_string(id), r.line));
        if (!broken_) broken_ = e;
        for (auto& [_, p] : pending_) p.set_exception(e);
        pending_.clear();
        return;
      }
      if (auto* resp = std::get_if<protocol::Response>(&frame)) {
        it->second.set_value(std::move(resp->candidates));
      } else {
        const auto& err = std::get<protocol::ErrorFrame>(frame);
        it->second.set_exception(std::make_exception_ptr(
            RemoteError("backend error for request " + std::to_string(id) + ": " + err.message)));
      }
      pending_.erase(it);
    }
  }

  std::unique_ptr<LineTransport> transport_;
  ClientOptions opts_;
  std::counting_semaphore<kMaxWindow> window_;
  std::string name_;
  std::thread reader_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> next_id_{1};

  std::mutex mu_;
  std::map<std::uint64_t, std::promise<std::vector<Candidate>>> pending_;
  std::set<std::uint64_t> abandoned_;
  std::exception_ptr broken_;
};

}  // namespace nextapp
