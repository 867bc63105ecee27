// Copyright 2026 The EdgeQuant Authors. All Rights Reserved.
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

#include "edgequant/threading.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace eq {

static std::atomic<int> g_default_threads{0};

int default_threads() {
  int n = g_default_threads.load();
  if (n > 0) return n;
  n = static_cast<int>(std::thread::hardware_concurrency());
  return n > 0 ? n : 1;
}

void set_default_threads(int n) { g_default_threads.store(n); }

int resolve_threads(int requested) { return requested > 0 ? requested : default_threads(); }

void parallel_for(int64_t count, int threads,
                  const std::function<void(int64_t, int64_t)>& fn) {
  if (count <= 0) return;
  threads = std::min<int64_t>(resolve_threads(threads), count);
  if (threads <= 1) {
    fn(0, count);
    return;
  }
  const int64_t chunk = (count + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (int t = 1; t < threads; ++t) {
    const int64_t begin = t * chunk;
    const int64_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(0, std::min(count, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace eq
