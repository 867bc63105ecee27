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

#ifndef EDGEQUANT_QUANTIZE_HPP_
#define EDGEQUANT_QUANTIZE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edgequant/graph.hpp"

namespace eq {

struct TensorStat {
  float min = 0.0f;
  float max = 0.0f;
  uint64_t samples = 0;

  bool operator==(const TensorStat&) const = default;
};

/// Running per-tensor min/max gathered from representative batches.
class CalibrationStats {
 public:
  void observe(const std::string& id, const Tensor& value);

  /// Elementwise min/max union; sample counts add. Associative and
  /// commutative, so per-worker stats can merge in any order.
  void merge(const CalibrationStats& other);

  const TensorStat* find(const std::string& id) const;
  bool empty() const { return stats_.empty(); }
  const std::map<std::string, TensorStat>& all() const { return stats_; }

  /// Text format, one record per line: id<TAB>min<TAB>max<TAB>samples.
  void save(const std::string& path) const;
  static CalibrationStats load(const std::string& path);

  bool operator==(const CalibrationStats&) const = default;

 private:
  std::map<std::string, TensorStat> stats_;
};

/// Every weight tensor converted to binary16; topology untouched.
Graph quantize_fp16(const Graph& g);

/// Folds BN, then converts conv/depthwise/fc weight tensors holding at
/// least `kDynamicSizeThreshold` elements to int8 (per-channel symmetric
/// for conv and depthwise, per-tensor symmetric for fc; per-tensor
/// everywhere when per_tensor_weights is set). Biases and small tensors
/// stay f32.
inline constexpr int64_t kDynamicSizeThreshold = 1024;
Graph quantize_dynamic(const Graph& g, bool per_tensor_weights = false);

/// Runs F32 inference over at most max_batches batches, recording min/max
/// of the input and of every node output of the BN-folded graph.
CalibrationStats calibrate(const Graph& g, const std::vector<Tensor>& batches,
                           int max_batches = 100, int threads = 0);

/// Folds BN, quantizes all conv/depthwise/fc weights (no size threshold),
/// bakes activation qparams from the stats, converts biases to i32 at scale
/// s_in * s_w, precomputes requantization multipliers, and fences the graph
/// with Quantize/Dequantize boundary nodes.
Graph quantize_full(const Graph& g, const CalibrationStats& stats,
                    bool per_tensor_weights = false);

}  // namespace eq

#endif  // EDGEQUANT_QUANTIZE_HPP_
