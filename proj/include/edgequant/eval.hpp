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

#ifndef EDGEQUANT_EVAL_HPP_
#define EDGEQUANT_EVAL_HPP_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "edgequant/dataset.hpp"
#include "edgequant/engine.hpp"
#include "edgequant/graph.hpp"

namespace eq {

/// K x K counts; rows are the true class, columns the predicted class.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<int64_t> counts;

  explicit ConfusionMatrix(int k = 0)
      : num_classes(k), counts(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0) {}

  int64_t& at(int truth, int pred) {
    return counts.at(static_cast<std::size_t>(truth) * num_classes + pred);
  }
  int64_t at(int truth, int pred) const {
    return counts.at(static_cast<std::size_t>(truth) * num_classes + pred);
  }
  int64_t total() const;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  std::vector<double> precision, recall, f1;  // per class
};

/// Per-class P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R); each 0 when its
/// denominator is 0. Macro metrics are unweighted means; accuracy is
/// trace/total.
Metrics metrics_from_cm(const ConfusionMatrix& cm);

struct EvalReport {
  std::string model_id;  // model identity, without the mode
  std::string mode;      // "f32" | "fp16" | "dynamic" | "full"
  uint64_t size_bytes = 0;
  std::string content_hash;  // fnv1a64 of the serialized container
  int64_t num_samples = 0;
  double latency_ms_per_sample = 0.0;  // informational, never asserted
  std::vector<std::string> class_names;
  Metrics metrics;
  std::string config_json;  // effective run config, embedded verbatim

  std::string label() const { return model_id + "-" + mode; }
};

struct EvalOptions {
  int batch_size = 32;
  int threads = 0;
  std::string model_id;  // defaults to the graph's family name
};

/// Runs the dataset through the engine, predicting argmax of the output
/// probabilities (ties break to the lowest class index).
EvalReport evaluate(const Graph& g, const LabeledDataset& ds, ExecMode mode,
                    const EvalOptions& opts = {});

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);
void save_report(const EvalReport& r, const std::string& path);
EvalReport load_report(const std::string& path);

struct ComparisonTable {
  std::string text;  // aligned columns for the terminal
  std::string csv;   // same rows, comma-separated
};

/// Rows grouped by model id; the size ratio is taken against the group's
/// f32 row (or its largest row when no f32 report is present).
ComparisonTable compare(const std::vector<EvalReport>& reports);

struct SizePriority {
  double f1_floor = 0.0;
};
struct AccuracyPriority {};
using SelectionPolicy = std::variant<SizePriority, AccuracyPriority>;

/// SizePriority: smallest size among reports with macro-F1 >= floor, ties to
/// the higher F1. AccuracyPriority: highest macro-F1, ties to the smaller
/// size. Remaining ties keep the earliest report.
const EvalReport& select_model(const std::vector<EvalReport>& reports,
                               const SelectionPolicy& policy);

/// FNV-1a 64-bit content hash, rendered as 16 hex digits.
std::string content_hash_hex(const std::vector<std::byte>& bytes);

}  // namespace eq

#endif  // EDGEQUANT_EVAL_HPP_
