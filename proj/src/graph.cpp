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

#include "edgequant/graph.hpp"

#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace eq {

const char* kind_name(const NodeKind& kind) {
  struct Visitor {
    const char* operator()(const Conv2dAttrs&) { return "conv2d"; }
    const char* operator()(const DepthwiseConv2dAttrs&) { return "depthwise_conv2d"; }
    const char* operator()(const FullyConnectedAttrs&) { return "fully_connected"; }
    const char* operator()(const BatchNormAttrs&) { return "batch_norm"; }
    const char* operator()(const ReluAttrs&) { return "relu"; }
    const char* operator()(const Relu6Attrs&) { return "relu6"; }
    const char* operator()(const SiluAttrs&) { return "silu"; }
    const char* operator()(const MaxPoolAttrs&) { return "max_pool"; }
    const char* operator()(const AvgPoolAttrs&) { return "avg_pool"; }
    const char* operator()(const GlobalAvgPoolAttrs&) { return "global_avg_pool"; }
    const char* operator()(const AddAttrs&) { return "add"; }
    const char* operator()(const ConcatAttrs&) { return "concat"; }
    const char* operator()(const SoftmaxAttrs&) { return "softmax"; }
    const char* operator()(const QuantizeAttrs&) { return "quantize"; }
    const char* operator()(const DequantizeAttrs&) { return "dequantize"; }
    const char* operator()(const SqueezeExciteAttrs&) { return "squeeze_excite"; }
  };
  return std::visit(Visitor{}, kind);
}

bool is_matmul_like(const NodeKind& kind) {
  return std::holds_alternative<Conv2dAttrs>(kind) ||
         std::holds_alternative<DepthwiseConv2dAttrs>(kind) ||
         std::holds_alternative<FullyConnectedAttrs>(kind);
}

const char* quant_tag_name(QuantTag tag) {
  switch (tag) {
    case QuantTag::None: return "none";
    case QuantTag::Fp16: return "fp16";
    case QuantTag::Dynamic: return "dynamic";
    case QuantTag::FullInt: return "full-int";
  }
  return "?";
}

QuantTag quant_tag_from_name(const std::string& name) {
  if (name == "none") return QuantTag::None;
  if (name == "fp16") return QuantTag::Fp16;
  if (name == "dynamic") return QuantTag::Dynamic;
  if (name == "full-int") return QuantTag::FullInt;
  throw ParseError("unknown quantization tag: " + name);
}

const Node* Graph::find(const std::string& id) const {
  for (const Node& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

Node* Graph::find(const std::string& id) {
  for (Node& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

void Graph::validate() const {
  if (input.h <= 0 || input.w <= 0 || input.c <= 0)
    throw InvalidArgument("graph: input spec dims must be positive");
  std::unordered_set<std::string> seen;
  std::unordered_set<std::string> reachable;
  reachable.insert(kInputId);
  for (const Node& n : nodes) {
    if (n.id == kInputId || !seen.insert(n.id).second)
      throw InvalidArgument("graph: duplicate or reserved node id '" + n.id + "'");
    if (n.inputs.empty())
      throw InvalidArgument("graph: node '" + n.id + "' has no inputs");
    bool from_live = false;
    for (const std::string& in : n.inputs) {
      if (in != kInputId && !seen.contains(in))
        throw InvalidArgument("graph: node '" + n.id + "' consumes unknown or later node '" +
                              in + "'");
      from_live = from_live || reachable.contains(in);
    }
    if (from_live) reachable.insert(n.id);
    for (std::size_t i = 0; i < n.weights.size(); ++i)
      n.weights[i].validate(n.id + ".w" + std::to_string(i));
  }
  for (const Node& n : nodes)
    if (!reachable.contains(n.id))
      throw InvalidArgument("graph: node '" + n.id + "' is not reachable from the input");
  if (outputs.empty()) throw InvalidArgument("graph: no outputs declared");
  for (const std::string& out : outputs)
    if (!seen.contains(out))
      throw InvalidArgument("graph: declared output '" + out + "' does not exist");
}

uint64_t param_count(const Graph& g) {
  uint64_t total = 0;
  for (const Node& n : g.nodes) {
    if (std::holds_alternative<BatchNormAttrs>(n.kind)) {
      // gamma and beta only; running stats are not trainable
      for (std::size_t i = 0; i < std::min<std::size_t>(2, n.weights.size()); ++i)
        total += static_cast<uint64_t>(n.weights[i].numel());
    } else {
      for (const Tensor& w : n.weights) total += static_cast<uint64_t>(w.numel());
    }
  }
  return total;
}

namespace {

int64_t conv_out_dim(int64_t in, int k, int stride, const Padding& pad, bool ceil_mode) {
  int64_t pad_total = 0;
  switch (pad.mode) {
    case PadMode::Valid: pad_total = 0; break;
    case PadMode::Same: {
      // TF-style SAME: output = ceil(in / stride)
      const int64_t out = (in + stride - 1) / stride;
      pad_total = std::max<int64_t>(0, (out - 1) * stride + k - in);
      break;
    }
    case PadMode::Explicit: pad_total = 2ll * pad.amount; break;
  }
  const int64_t span = in + pad_total - k;
  if (span < 0) throw InvalidArgument("window larger than padded input");
  if (ceil_mode) return (span + stride - 1) / stride + 1;
  return span / stride + 1;
}

void pad_amounts(int64_t in, int k, int stride, const Padding& pad, int64_t* before,
                 int64_t* after) {
  switch (pad.mode) {
    case PadMode::Valid:
      *before = *after = 0;
      return;
    case PadMode::Explicit:
      *before = *after = pad.amount;
      return;
    case PadMode::Same: {
      const int64_t out = (in + stride - 1) / stride;
      const int64_t total = std::max<int64_t>(0, (out - 1) * stride + k - in);
      *before = total / 2;
      *after = total - *before;
      return;
    }
  }
}

}  // namespace

std::vector<int64_t> node_output_shape(const Node& node,
                                       const std::vector<std::vector<int64_t>>& in) {
  if (in.empty()) throw InvalidArgument("node_output_shape: no input shapes");
  const auto& x = in[0];
  struct Visitor {
    const Node& node;
    const std::vector<std::vector<int64_t>>& in;
    const std::vector<int64_t>& x;

    std::vector<int64_t> operator()(const Conv2dAttrs& a) {
      const Tensor& w = node.weights.at(0);
      const int64_t cout = w.dim(3);
      if (x.size() != 4) throw InvalidArgument("conv2d expects NHWC input");
      if (x[3] != w.dim(2) * a.groups)
        throw InvalidArgument("conv2d '" + node.id + "': input channels do not match weights");
      return {x[0], conv_out_dim(x[1], a.kh, a.stride, a.pad, false),
              conv_out_dim(x[2], a.kw, a.stride, a.pad, false), cout};
    }
    std::vector<int64_t> operator()(const DepthwiseConv2dAttrs& a) {
      const Tensor& w = node.weights.at(0);
      if (x.size() != 4 || x[3] != w.dim(3))
        throw InvalidArgument("depthwise '" + node.id + "': channel mismatch");
      return {x[0], conv_out_dim(x[1], a.kh, a.stride, a.pad, false),
              conv_out_dim(x[2], a.kw, a.stride, a.pad, false), x[3]};
    }
    std::vector<int64_t> operator()(const FullyConnectedAttrs&) {
      const Tensor& w = node.weights.at(0);
      int64_t flat = 1;
      for (std::size_t i = 1; i < x.size(); ++i) flat *= x[i];
      if (flat != w.dim(0))
        throw InvalidArgument("fc '" + node.id + "': flattened input size " +
                              std::to_string(flat) + " != weight rows " +
                              std::to_string(w.dim(0)));
      return {x[0], w.dim(1)};
    }
    std::vector<int64_t> operator()(const BatchNormAttrs&) { return x; }
    std::vector<int64_t> operator()(const ReluAttrs&) { return x; }
    std::vector<int64_t> operator()(const Relu6Attrs&) { return x; }
    std::vector<int64_t> operator()(const SiluAttrs&) { return x; }
    std::vector<int64_t> operator()(const MaxPoolAttrs& a) {
      return {x[0], conv_out_dim(x[1], a.k, a.stride, a.pad, a.ceil_mode),
              conv_out_dim(x[2], a.k, a.stride, a.pad, a.ceil_mode), x[3]};
    }
    std::vector<int64_t> operator()(const AvgPoolAttrs& a) {
      return {x[0], conv_out_dim(x[1], a.k, a.stride, a.pad, a.ceil_mode),
              conv_out_dim(x[2], a.k, a.stride, a.pad, a.ceil_mode), x[3]};
    }
    std::vector<int64_t> operator()(const GlobalAvgPoolAttrs&) { return {x[0], 1, 1, x[3]}; }
    std::vector<int64_t> operator()(const AddAttrs&) {
      if (in.size() != 2 || in[0] != in[1])
        throw InvalidArgument("add '" + node.id + "': operands must share a shape");
      return x;
    }
    std::vector<int64_t> operator()(const ConcatAttrs& a) {
      std::vector<int64_t> out = x;
      int64_t axis_total = 0;
      for (const auto& s : in) {
        if (s.size() != x.size()) throw InvalidArgument("concat: rank mismatch");
        for (std::size_t d = 0; d < s.size(); ++d)
          if (static_cast<int>(d) != a.axis && s[d] != x[d])
            throw InvalidArgument("concat '" + node.id + "': non-axis dims differ");
        axis_total += s[a.axis];
      }
      out[a.axis] = axis_total;
      return out;
    }
    std::vector<int64_t> operator()(const SoftmaxAttrs&) { return x; }
    std::vector<int64_t> operator()(const QuantizeAttrs&) { return x; }
    std::vector<int64_t> operator()(const DequantizeAttrs&) { return x; }
    std::vector<int64_t> operator()(const SqueezeExciteAttrs&) { return x; }
  };
  return std::visit(Visitor{node, in, x}, node.kind);
}

void compute_padding(int64_t in, int k, int stride, const Padding& pad, int64_t* before,
                     int64_t* after) {
  pad_amounts(in, k, stride, pad, before, after);
}

Graph fold_batchnorm(const Graph& g) {
  // consumers[id] = number of nodes reading id
  std::unordered_map<std::string, int> consumers;
  for (const Node& n : g.nodes)
    for (const std::string& in : n.inputs) ++consumers[in];

  Graph out;
  out.input = g.input;
  out.meta = g.meta;
  out.outputs = g.outputs;

  // Maps a folded BN id to the id of the conv that absorbed it.
  std::unordered_map<std::string, std::string> replaced;
  std::unordered_map<std::string, std::size_t> index_in_out;

  for (const Node& n : g.nodes) {
    if (!std::holds_alternative<BatchNormAttrs>(n.kind)) {
      Node copy = n;
      for (std::string& in : copy.inputs) {
        auto it = replaced.find(in);
        if (it != replaced.end()) in = it->second;
      }
      index_in_out[copy.id] = out.nodes.size();
      out.nodes.push_back(std::move(copy));
      continue;
    }

    const auto& attrs = std::get<BatchNormAttrs>(n.kind);
    if (n.inputs.size() != 1)
      throw UnsupportedPattern("fold_batchnorm: BN '" + n.id + "' must have one input");
    std::string src = n.inputs[0];
    if (auto it = replaced.find(src); it != replaced.end()) src = it->second;
    auto idx = index_in_out.find(src);
    if (idx == index_in_out.end())
      throw UnsupportedPattern("fold_batchnorm: BN '" + n.id + "' does not follow a node");
    Node& prev = out.nodes[idx->second];
    if (!is_matmul_like(prev.kind))
      throw UnsupportedPattern("fold_batchnorm: BN '" + n.id + "' follows non-matmul node '" +
                               prev.id + "'");
    if (consumers[n.inputs[0]] != 1)
      throw UnsupportedPattern("fold_batchnorm: '" + prev.id +
                               "' feeds more than its BatchNorm");
    if (prev.weights.empty() || prev.weights[0].dtype() != DType::F32)
      throw UnsupportedPattern("fold_batchnorm: preceding weights must be f32");
    if (n.weights.size() != 4)
      throw UnsupportedPattern("fold_batchnorm: BN '" + n.id + "' needs gamma/beta/mean/var");

    const auto gamma = n.weights[0].f32();
    const auto beta = n.weights[1].f32();
    const auto mean = n.weights[2].f32();
    const auto var = n.weights[3].f32();
    const int64_t channels = n.weights[0].numel();

    Tensor& w = prev.weights[0];
    const int64_t cout = w.shape().back();
    if (cout != channels)
      throw UnsupportedPattern("fold_batchnorm: channel mismatch between '" + prev.id +
                               "' and '" + n.id + "'");

    std::vector<float> factor(channels);
    for (int64_t c = 0; c < channels; ++c)
      factor[c] = gamma[c] / std::sqrt(var[c] + attrs.eps);

    // Output channels are the innermost axis of both HWIO and (in, out)
    // weights, so one strided pass covers conv, depthwise, and fc.
    auto wd = w.f32();
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] *= factor[i % channels];

    bool had_bias = false;
    if (std::holds_alternative<Conv2dAttrs>(prev.kind))
      had_bias = std::get<Conv2dAttrs>(prev.kind).has_bias;
    else if (std::holds_alternative<DepthwiseConv2dAttrs>(prev.kind))
      had_bias = std::get<DepthwiseConv2dAttrs>(prev.kind).has_bias;
    else
      had_bias = std::get<FullyConnectedAttrs>(prev.kind).has_bias;

    Tensor bias = had_bias && prev.weights.size() > 1 ? prev.weights[1]
                                                      : Tensor::zeros({channels}, DType::F32);
    auto bd = bias.f32();
    for (int64_t c = 0; c < channels; ++c)
      bd[c] = (bd[c] - mean[c]) * factor[c] + beta[c];

    prev.weights.resize(1);
    prev.weights.push_back(std::move(bias));
    if (auto* conv = std::get_if<Conv2dAttrs>(&prev.kind))
      conv->has_bias = true;
    else if (auto* dw = std::get_if<DepthwiseConv2dAttrs>(&prev.kind))
      dw->has_bias = true;
    else
      std::get<FullyConnectedAttrs>(prev.kind).has_bias = true;

    replaced[n.id] = prev.id;
  }

  for (std::string& o : out.outputs) {
    auto it = replaced.find(o);
    if (it != replaced.end()) o = it->second;
  }
  out.validate();
  return out;
}

Graph import_weights(const Graph& g, const Graph& donor) {
  Graph out = g;
  for (const Node& src : donor.nodes) {
    Node* dst = out.find(src.id);
    if (!dst) throw InvalidArgument("import_weights: no node named '" + src.id + "'");
    if (dst->weights.size() != src.weights.size())
      throw InvalidArgument("import_weights: weight count mismatch at '" + src.id + "'");
    for (std::size_t i = 0; i < src.weights.size(); ++i) {
      if (src.weights[i].shape() != dst->weights[i].shape())
        throw InvalidArgument("import_weights: shape mismatch at '" + src.id + ".w" +
                              std::to_string(i) + "'");
      dst->weights[i] = src.weights[i];
    }
  }
  return out;
}

}  // namespace eq
