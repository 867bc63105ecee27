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

#ifndef EDGEQUANT_TRAIN_HPP_
#define EDGEQUANT_TRAIN_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edgequant/dataset.hpp"
#include "edgequant/graph.hpp"
#include "edgequant/tensor.hpp"

namespace eq {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  float lr0 = 0.01f;
  float momentum = 0.9f;
  int lr_step_epochs = 7;
  float lr_gamma = 0.1f;
  uint64_t seed = 0;
  float weight_decay = 0.0f;
};

struct EpochRow {
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  float lr = 0.0f;
};

struct TrainReport {
  std::vector<EpochRow> epochs;
  int best_epoch = -1;
  double best_val_acc = 0.0;
  std::string checkpoint_path;  // filled in by callers that save the model
};

/// Step-decay schedule: lr0 * gamma^floor(epoch / lr_step_epochs).
float lr_at(int epoch, const TrainConfig& cfg);

struct CrossEntropyResult {
  double loss = 0.0;
  Tensor grad;  // d(loss)/d(logits), same shape as logits
};

/// Mean softmax cross-entropy over N rows of K logits, in the stable
/// log-sum-exp form. Gradient is (softmax - one_hot) / N.
CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels);

struct BackwardResult {
  double loss = 0.0;
  Tensor logits;  // pre-softmax outputs, one row per sample
  // Per node id, one gradient tensor per weight tensor (same order and
  // shapes). Batch-norm running statistics get zero gradients.
  std::map<std::string, std::vector<Tensor>> grads;
};

/// Full forward + backward pass with the loss attached to the input of the
/// trailing softmax. The graph must be unquantized.
BackwardResult backward(const Graph& g, const Tensor& batch, const std::vector<int>& labels,
                        int threads = 0);

/// SGD with momentum (v = mu*v + grad; w -= lr*v) under the step-decay
/// schedule. Deterministic for a fixed seed and any thread count. Returns
/// the weights of the best-validation-accuracy epoch.
std::pair<Graph, TrainReport> train(const Graph& g, const LabeledDataset& train_ds,
                                    const LabeledDataset& val_ds, const TrainConfig& cfg,
                                    int threads = 0);

/// Replaces the trailing fully-connected layer with a freshly initialized
/// in_features x num_classes head; every other tensor is left untouched.
Graph replace_head(const Graph& g, int num_classes, uint64_t seed);

}  // namespace eq

#endif  // EDGEQUANT_TRAIN_HPP_
