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

#ifndef EDGEQUANT_GRAPH_HPP_
#define EDGEQUANT_GRAPH_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "edgequant/fixedpoint.hpp"
#include "edgequant/tensor.hpp"

namespace eq {

// Layer graph IR. Nodes are stored in topological order; the reserved id
// "input" names the graph input placeholder. Activations and weights are
// NHWC / HWIO throughout, so the channel axis is always the last one.

enum class PadMode : uint8_t { Valid, Same, Explicit };

struct Padding {
  PadMode mode = PadMode::Valid;
  int amount = 0;  // used when mode == Explicit

  static Padding valid() { return {}; }
  static Padding same() { return {PadMode::Same, 0}; }
  static Padding explicit_pad(int n) { return {PadMode::Explicit, n}; }

  bool operator==(const Padding&) const = default;
};

// Weight conventions:
//   Conv2D            w: (kh, kw, cin/groups, cout), optional bias: (cout)
//   DepthwiseConv2D   w: (kh, kw, 1, channels),      optional bias: (channels)
//   FullyConnected    w: (in, out),                  optional bias: (out)
//   BatchNorm         gamma, beta, running_mean, running_var: (channels)
//   SqueezeExcite     w1: (1,1,c,squeeze), b1, w2: (1,1,squeeze,c), b2

struct Conv2dAttrs {
  int kh = 1, kw = 1;
  int stride = 1;
  Padding pad;
  int groups = 1;
  bool has_bias = true;
  bool operator==(const Conv2dAttrs&) const = default;
};

struct DepthwiseConv2dAttrs {
  int kh = 1, kw = 1;
  int stride = 1;
  Padding pad;
  bool has_bias = true;
  bool operator==(const DepthwiseConv2dAttrs&) const = default;
};

struct FullyConnectedAttrs {
  bool has_bias = true;
  bool operator==(const FullyConnectedAttrs&) const = default;
};

struct BatchNormAttrs {
  float eps = 1e-5f;
  bool operator==(const BatchNormAttrs&) const = default;
};

struct ReluAttrs {
  bool operator==(const ReluAttrs&) const = default;
};
struct Relu6Attrs {
  bool operator==(const Relu6Attrs&) const = default;
};
struct SiluAttrs {
  bool operator==(const SiluAttrs&) const = default;
};

struct MaxPoolAttrs {
  int k = 2;
  int stride = 2;
  Padding pad;
  bool ceil_mode = false;
  bool operator==(const MaxPoolAttrs&) const = default;
};

struct AvgPoolAttrs {
  int k = 2;
  int stride = 2;
  Padding pad;
  bool ceil_mode = false;
  bool operator==(const AvgPoolAttrs&) const = default;
};

struct GlobalAvgPoolAttrs {
  bool operator==(const GlobalAvgPoolAttrs&) const = default;
};

struct AddAttrs {
  bool operator==(const AddAttrs&) const = default;
};

struct ConcatAttrs {
  int axis = 3;
  bool operator==(const ConcatAttrs&) const = default;
};

struct SoftmaxAttrs {
  bool operator==(const SoftmaxAttrs&) const = default;
};

struct QuantizeAttrs {
  bool operator==(const QuantizeAttrs&) const = default;
};
struct DequantizeAttrs {
  bool operator==(const DequantizeAttrs&) const = default;
};

struct SqueezeExciteAttrs {
  float ratio = 0.25f;  // informational; actual dims come from the weights
  bool operator==(const SqueezeExciteAttrs&) const = default;
};

using NodeKind =
    std::variant<Conv2dAttrs, DepthwiseConv2dAttrs, FullyConnectedAttrs, BatchNormAttrs,
                 ReluAttrs, Relu6Attrs, SiluAttrs, MaxPoolAttrs, AvgPoolAttrs,
                 GlobalAvgPoolAttrs, AddAttrs, ConcatAttrs, SoftmaxAttrs, QuantizeAttrs,
                 DequantizeAttrs, SqueezeExciteAttrs>;

const char* kind_name(const NodeKind& kind);
bool is_matmul_like(const NodeKind& kind);  // conv / depthwise / fc

struct Node {
  std::string id;
  NodeKind kind;
  std::vector<std::string> inputs;
  std::vector<Tensor> weights;

  // Full-integer execution metadata: the activation params of this node's
  // output tensor, and the requantization multipliers (per output channel
  // for conv/fc, per operand for add/concat).
  std::optional<QuantParams> out_qparams;
  std::vector<FixedPointMultiplier> requant;

  bool operator==(const Node&) const = default;
};

enum class QuantTag : uint8_t { None, Fp16, Dynamic, FullInt };

const char* quant_tag_name(QuantTag tag);
QuantTag quant_tag_from_name(const std::string& name);

struct InputSpec {
  // Nominal batch size; run() accepts any batch count with matching H, W, C.
  int64_t n = 1, h = 0, w = 0, c = 0;
  DType dtype = DType::F32;
  bool operator==(const InputSpec&) const = default;
};

struct GraphMeta {
  std::string family;
  int num_classes = 0;
  QuantTag quant = QuantTag::None;
  std::vector<std::string> class_names;  // optional, attached by training
  bool operator==(const GraphMeta&) const = default;
};

struct Graph {
  InputSpec input;
  std::vector<Node> nodes;  // topological order
  std::vector<std::string> outputs;
  GraphMeta meta;

  const Node* find(const std::string& id) const;
  Node* find(const std::string& id);

  /// Checks topological validity: unique ids, inputs referring to earlier
  /// nodes or "input", reachability from the input, and declared outputs
  /// existing. Throws InvalidArgument on the first violation.
  void validate() const;

  bool operator==(const Graph&) const = default;
};

/// Reserved id naming the graph input inside Node::inputs.
inline const char* kInputId = "input";

/// Total trainable parameter count: conv/fc/se weights and biases plus the
/// batch-norm gamma/beta pairs. Running statistics are excluded.
uint64_t param_count(const Graph& g);

/// Output shape of a node given its input shapes (all NHWC).
std::vector<int64_t> node_output_shape(const Node& node,
                                       const std::vector<std::vector<int64_t>>& input_shapes);

/// Padding before/after one spatial dim for the given mode.
void compute_padding(int64_t in, int k, int stride, const Padding& pad, int64_t* before,
                     int64_t* after);

/// Absorbs every BatchNorm into the convolution or fully-connected node
/// immediately preceding it: w' = w * g / sqrt(var + eps),
/// b' = (b - mean) * g / sqrt(var + eps) + beta. Graphs without BN pass
/// through unchanged. Throws UnsupportedPattern when a BN does not directly
/// and exclusively follow a matmul-like node.
Graph fold_batchnorm(const Graph& g);

/// Copies weight tensors by name ("<node_id>.w<k>") from `donor` into
/// matching nodes of `g`. Shapes must agree; unknown names are errors.
/// Enables importing externally produced weights from another container.
Graph import_weights(const Graph& g, const Graph& donor);

}  // namespace eq

#endif  // EDGEQUANT_GRAPH_HPP_
