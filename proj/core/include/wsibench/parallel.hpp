// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace wsibench {

// Runs fn(j) for j in [0, jobs) on up to `threads` workers with a static
// strided assignment. The first exception (by worker index) is rethrown
// after all workers finish.
template <class Fn>
void parallel_for(std::size_t jobs, unsigned threads, Fn&& fn) {
  const unsigned workers = std::max(1u, static_cast<unsigned>(std::min<std::size_t>(threads, jobs)));
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t j = w; j < jobs; j += workers) fn(j);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace wsibench
