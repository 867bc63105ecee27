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

#ifndef EDGEQUANT_ENGINE_HPP_
#define EDGEQUANT_ENGINE_HPP_

#include <functional>
#include <string>

#include "edgequant/graph.hpp"

namespace eq {

enum class ExecMode : uint8_t { F32, Fp16, DynamicInt8, FullInt8 };

/// The only mode a graph with the given tag may run under.
ExecMode exec_mode_for_tag(QuantTag tag);
const char* exec_mode_name(ExecMode mode);
ExecMode exec_mode_from_name(const std::string& name);  // f32|fp16|dynamic|full

struct RunOptions {
  int threads = 0;  // 0: process default

  /// Called for the input tensor (id "input") and every node output, in
  /// execution order. Only honored on the F32 path.
  std::function<void(const std::string& id, const Tensor& value)> observer;
};

/// Executes the graph on an NHWC f32 batch and returns the declared output
/// (class probabilities for classifier graphs). The mode must match the
/// graph's quantization tag. Bit-deterministic for fixed inputs regardless
/// of thread count.
Tensor run(const Graph& g, const Tensor& batch, ExecMode mode, const RunOptions& opts = {});

/// run() with the mode implied by the graph tag.
Tensor run_auto(const Graph& g, const Tensor& batch, const RunOptions& opts = {});

}  // namespace eq

#endif  // EDGEQUANT_ENGINE_HPP_
