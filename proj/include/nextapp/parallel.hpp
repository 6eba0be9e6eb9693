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
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <type_traits>
#include <vector>

namespace nextapp {

// Applies `fn` to every item using up to `workers` threads. Results are
// returned in input order, so output never depends on the worker count.
template <typename T, typename Fn>
auto parallel_map(std::span<const T> items, Fn&& fn, std::size_t workers)
    -> std::vector<std::invoke_result_t<Fn&, const T&>> {
  using R = std::invoke_result_t<Fn&, const T&>;
  std::vector<std::optional<R>> slots(items.size());
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(items.size(), 1));

  if (workers == 1) {
    std::vector<R> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(fn(item));
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= items.size()) return;
          try {
            slots[i].emplace(fn(items[i]));
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            next.store(items.size());
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  std::vector<R> out;
  out.reserve(items.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

template <typename T, typename Fn>
auto parallel_map(const std::vector<T>& items, Fn&& fn, std::size_t workers) {
  return parallel_map(std::span<const T>(items), std::forward<Fn>(fn), workers);
}

}  // namespace nextapp
