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

#ifndef EDGEQUANT_THREADING_HPP_
#define EDGEQUANT_THREADING_HPP_

#include <cstdint>
#include <functional>

namespace eq {

/// Process-wide default worker count (hardware concurrency unless overridden).
int default_threads();
void set_default_threads(int n);

/// Runs fn(begin, end) over contiguous chunks of [0, count). Every index is
/// handled by exactly one worker, so results never depend on the worker
/// count as long as distinct indices write distinct outputs.
void parallel_for(int64_t count, int threads,
                  const std::function<void(int64_t, int64_t)>& fn);

/// Resolves a requested thread count: 0 means the process default.
int resolve_threads(int requested);

}  // namespace eq

#endif  // EDGEQUANT_THREADING_HPP_
