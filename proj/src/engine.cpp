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

#include "edgequant/engine.hpp"

#include <unordered_map>

#include "edgequant/threading.hpp"
#include "kernels.hpp"

namespace eq {
namespace {

namespace k = kernels;

const Tensor* weight_or_null(const Node& n, std::size_t i, bool present) {
  if (!present) return nullptr;
  if (n.weights.size() <= i)
    throw InvalidArgument("node '" + n.id + "': declared bias tensor is missing");
  return &n.weights[i];
}

class Executor {
 public:
  Executor(const Graph& g, ExecMode mode, const RunOptions& opts)
      : g_(g), mode_(mode), threads_(resolve_threads(opts.threads)), opts_(opts) {}

  Tensor operator()(const Tensor& batch) {
    check_input(batch);
    values_.emplace(kInputId, batch);
    if (opts_.observer && mode_ == ExecMode::F32) opts_.observer(kInputId, batch);
    for (const Node& n : g_.nodes) {
      Tensor out = exec_node(n);
      if (opts_.observer && mode_ == ExecMode::F32) opts_.observer(n.id, out);
      values_.emplace(n.id, std::move(out));
    }
    auto it = values_.find(g_.outputs.front());
    return it->second;
  }

 private:
  void check_input(const Tensor& batch) {
    const auto& s = batch.shape();
    if (batch.dtype() != DType::F32 || s.size() != 4)
      throw InvalidArgument("run: batch must be a rank-4 f32 NHWC tensor");
    if (s[1] != g_.input.h || s[2] != g_.input.w || s[3] != g_.input.c)
      throw InvalidArgument("run: batch is " + std::to_string(s[1]) + "x" + std::to_string(s[2]) +
                            "x" + std::to_string(s[3]) + ", graph expects " +
                            std::to_string(g_.input.h) + "x" + std::to_string(g_.input.w) + "x" +
                            std::to_string(g_.input.c));
  }

  const Tensor& in(const Node& n, std::size_t i = 0) const {
    return values_.at(n.inputs.at(i));
  }

  std::vector<const Tensor*> all_inputs(const Node& n) const {
    std::vector<const Tensor*> xs;
    xs.reserve(n.inputs.size());
    for (const auto& id : n.inputs) xs.push_back(&values_.at(id));
    return xs;
  }

  const QuantParams& out_qp(const Node& n) const {
    if (!n.out_qparams)
      throw InvalidState("node '" + n.id + "': missing activation qparams for full-int run");
    return *n.out_qparams;
  }

  bool integer_weights(const Node& n) const {
    return !n.weights.empty() && n.weights[0].dtype() == DType::I8;
  }

  Tensor exec_node(const Node& n) {
    struct Visitor {
      Executor& e;
      const Node& n;

      Tensor operator()(const Conv2dAttrs& a) {
        const Tensor& x = e.in(n);
        const Tensor* bias = weight_or_null(n, 1, a.has_bias);
        if (e.mode_ == ExecMode::FullInt8)
          return k::conv2d_int8(x, n.weights[0], bias, a, e.out_qp(n), n.requant, e.threads_);
        if (e.mode_ == ExecMode::DynamicInt8 && e.integer_weights(n))
          return k::conv2d_dynamic(x, n.weights[0], bias, a, e.threads_);
        return k::conv2d_f32(x, n.weights[0], bias, a, e.threads_);
      }
      Tensor operator()(const DepthwiseConv2dAttrs& a) {
        const Tensor& x = e.in(n);
        const Tensor* bias = weight_or_null(n, 1, a.has_bias);
        if (e.mode_ == ExecMode::FullInt8)
          return k::depthwise_int8(x, n.weights[0], bias, a, e.out_qp(n), n.requant, e.threads_);
        if (e.mode_ == ExecMode::DynamicInt8 && e.integer_weights(n))
          return k::depthwise_dynamic(x, n.weights[0], bias, a, e.threads_);
        return k::depthwise_f32(x, n.weights[0], bias, a, e.threads_);
      }
      Tensor operator()(const FullyConnectedAttrs& a) {
        const Tensor& x = e.in(n);
        const Tensor* bias = weight_or_null(n, 1, a.has_bias);
        if (e.mode_ == ExecMode::FullInt8)
          return k::fully_connected_int8(x, n.weights[0], bias, e.out_qp(n), n.requant,
                                         e.threads_);
        if (e.mode_ == ExecMode::DynamicInt8 && e.integer_weights(n))
          return k::fully_connected_dynamic(x, n.weights[0], bias, e.threads_);
        return k::fully_connected_f32(x, n.weights[0], bias, e.threads_);
      }
      Tensor operator()(const BatchNormAttrs& a) {
        if (e.mode_ == ExecMode::FullInt8)
          throw UnsupportedPattern("node '" + n.id + "': batch norm must be folded before full-int");
        return k::batchnorm_f32(e.in(n), n.weights.at(0), n.weights.at(1), n.weights.at(2),
                                n.weights.at(3), a.eps, e.threads_);
      }
      Tensor operator()(const ReluAttrs&) {
        const Tensor& x = e.in(n);
        return e.mode_ == ExecMode::FullInt8 ? k::relu_int8(x, e.threads_)
                                             : k::relu_f32(x, e.threads_);
      }
      Tensor operator()(const Relu6Attrs&) {
        const Tensor& x = e.in(n);
        return e.mode_ == ExecMode::FullInt8 ? k::relu6_int8(x, e.threads_)
                                             : k::relu6_f32(x, e.threads_);
      }
      Tensor operator()(const SiluAttrs&) {
        const Tensor& x = e.in(n);
        return e.mode_ == ExecMode::FullInt8 ? k::silu_int8(x, e.out_qp(n), e.threads_)
                                             : k::silu_f32(x, e.threads_);
      }
      Tensor operator()(const MaxPoolAttrs& a) {
        const Tensor& x = e.in(n);
        return e.mode_ == ExecMode::FullInt8 ? k::maxpool_int8(x, a, e.threads_)
                                             : k::maxpool_f32(x, a, e.threads_);
      }
      Tensor operator()(const AvgPoolAttrs& a) {
        const Tensor& x = e.in(n);
        return e.mode_ == ExecMode::FullInt8 ? k::avgpool_int8(x, a, e.threads_)
                                             : k::avgpool_f32(x, a, e.threads_);
      }
      Tensor operator()(const GlobalAvgPoolAttrs&) {
        const Tensor& x = e.in(n);
        return e.mode_ == ExecMode::FullInt8 ? k::global_avgpool_int8(x, e.threads_)
                                             : k::global_avgpool_f32(x, e.threads_);
      }
      Tensor operator()(const AddAttrs&) {
        const Tensor& a = e.in(n, 0);
        const Tensor& b = e.in(n, 1);
        return e.mode_ == ExecMode::FullInt8
                   ? k::add_int8(a, b, e.out_qp(n), n.requant, e.threads_)
                   : k::add_f32(a, b, e.threads_);
      }
      Tensor operator()(const ConcatAttrs& a) {
        if (a.axis != 3)
          throw UnsupportedPattern("node '" + n.id + "': concat only along channels");
        const auto xs = e.all_inputs(n);
        return e.mode_ == ExecMode::FullInt8
                   ? k::concat_int8(xs, e.out_qp(n), n.requant, e.threads_)
                   : k::concat_channels(xs, e.threads_);
      }
      Tensor operator()(const SoftmaxAttrs&) {
        const Tensor& x = e.in(n);
        if (x.dtype() != DType::F32)
          throw InvalidState("node '" + n.id + "': softmax expects a dequantized input");
        return k::softmax_f32(x, e.threads_);
      }
      Tensor operator()(const QuantizeAttrs&) {
        return quantize_affine(e.in(n), e.out_qp(n));
      }
      Tensor operator()(const DequantizeAttrs&) { return dequantize(e.in(n)); }
      Tensor operator()(const SqueezeExciteAttrs&) {
        const Tensor& x = e.in(n);
        const Tensor& w1 = n.weights.at(0);
        const Tensor& b1 = n.weights.at(1);
        const Tensor& w2 = n.weights.at(2);
        const Tensor& b2 = n.weights.at(3);
        return e.mode_ == ExecMode::FullInt8
                   ? k::squeeze_excite_int8(x, w1, b1, w2, b2, e.out_qp(n), e.threads_)
                   : k::squeeze_excite_f32(x, w1, b1, w2, b2, e.threads_);
      }
    };
    return std::visit(Visitor{*this, n}, n.kind);
  }

  const Graph& g_;
  ExecMode mode_;
  int threads_;
  const RunOptions& opts_;
  std::unordered_map<std::string, Tensor> values_;
};

// The fp16 path materializes an f32 twin once and runs the float kernels.
Graph dequantized_twin(const Graph& g) {
  Graph out = g;
  for (Node& n : out.nodes)
    for (Tensor& w : n.weights)
      if (w.dtype() == DType::F16) w = tensor_to_f32(w);
  return out;
}

}  // namespace

ExecMode exec_mode_for_tag(QuantTag tag) {
  switch (tag) {
    case QuantTag::None: return ExecMode::F32;
    case QuantTag::Fp16: return ExecMode::Fp16;
    case QuantTag::Dynamic: return ExecMode::DynamicInt8;
    case QuantTag::FullInt: return ExecMode::FullInt8;
  }
  throw InvalidArgument("unknown quant tag");
}

const char* exec_mode_name(ExecMode mode) {
  switch (mode) {
    case ExecMode::F32: return "f32";
    case ExecMode::Fp16: return "fp16";
    case ExecMode::DynamicInt8: return "dynamic";
    case ExecMode::FullInt8: return "full";
  }
  return "?";
}

ExecMode exec_mode_from_name(const std::string& name) {
  if (name == "f32") return ExecMode::F32;
  if (name == "fp16") return ExecMode::Fp16;
  if (name == "dynamic") return ExecMode::DynamicInt8;
  if (name == "full" || name == "full-int") return ExecMode::FullInt8;
  throw InvalidArgument("unknown execution mode: " + name);
}

Tensor run(const Graph& g, const Tensor& batch, ExecMode mode, const RunOptions& opts) {
  if (mode != exec_mode_for_tag(g.meta.quant))
    throw InvalidArgument(std::string("run: mode ") + exec_mode_name(mode) +
                          " does not match graph quantization tag '" +
                          quant_tag_name(g.meta.quant) + "'");
  if (mode == ExecMode::Fp16) {
    const Graph twin = dequantized_twin(g);
    // The twin holds plain f32 weights; execute it on the float path.
    return Executor(twin, ExecMode::F32, opts)(batch);
  }
  return Executor(g, mode, opts)(batch);
}

Tensor run_auto(const Graph& g, const Tensor& batch, const RunOptions& opts) {
  return run(g, batch, exec_mode_for_tag(g.meta.quant), opts);
}

}  // namespace eq
