// Copyright (c) 2026 the sprout authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <thread>
#include <vector>

#include "sprout/simd.hpp"

namespace sprout::kern {

// Split [0, count) into contiguous chunks, one per worker. Each chunk is
// processed with the same arithmetic as the serial loop, so results do not
// depend on the thread count.
inline void parallel_range(int count, const std::function<void(int, int)>& fn) {
  const int want = simd::threads();
  if (want <= 1 || count < 64) {
    fn(0, count);
    return;
  }
  const int workers = std::min(want, count);
  const int chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int t = 1; t < workers; ++t) {
    const int b = t * chunk;
    const int e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back(fn, b, e);
  }
  fn(0, std::min(count, chunk));
  for (auto& th : pool) th.join();
}

inline void parallel_rows(int rows, const std::function<void(int, int)>& fn) {
  parallel_range(rows, fn);
}

inline void parallel_cols(int cols, const std::function<void(int, int)>& fn) {
  parallel_range(cols, fn);
}

}  // namespace sprout::kern
