// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace votedet {

inline int default_worker_count() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Runs fn(index) for every index in [0, count) on up to `workers` threads.
/// Indices are handed out atomically; fn must not touch shared mutable state
/// unless it synchronizes on its own.
template <typename Fn>
void parallel_for_index(size_t count, int workers, Fn&& fn) {
  if (count == 0) return;
  if (workers <= 1 || count == 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto body = [&] {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= count) break;
      fn(i);
    }
  };
  const size_t t = std::min<size_t>(workers, count);
  std::vector<std::thread> threads;
  threads.reserve(t - 1);
  for (size_t w = 1; w < t; ++w) threads.emplace_back(body);
  body();
  for (auto& th : threads) th.join();
}

}  // namespace votedet
