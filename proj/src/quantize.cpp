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

#include "edgequant/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "edgequant/engine.hpp"

namespace eq {

void CalibrationStats::observe(const std::string& id, const Tensor& value) {
  if (value.dtype() != DType::F32)
    throw InvalidArgument("calibration observes f32 tensors only");
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (const float v : value.f32()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo <= hi)) throw InvalidArgument("calibration: empty or non-finite tensor '" + id + "'");
  auto [it, inserted] = stats_.try_emplace(id, TensorStat{lo, hi, 1});
  if (!inserted) {
    it->second.min = std::min(it->second.min, lo);
    it->second.max = std::max(it->second.max, hi);
    it->second.samples += 1;
  }
}

void CalibrationStats::merge(const CalibrationStats& other) {
  for (const auto& [id, s] : other.stats_) {
    auto [it, inserted] = stats_.try_emplace(id, s);
    if (!inserted) {
      it->second.min = std::min(it->second.min, s.min);
      it->second.max = std::max(it->second.max, s.max);
      it->second.samples += s.samples;
    }
  }
}

const TensorStat* CalibrationStats::find(const std::string& id) const {
  auto it = stats_.find(id);
  return it == stats_.end() ? nullptr : &it->second;
}

void CalibrationStats::save(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << "eqstats v1\n";
  f << std::setprecision(9);
  for (const auto& [id, s] : stats_)
    f << id << '\t' << s.min << '\t' << s.max << '\t' << s.samples << '\n';
  if (!f) throw DataError("short write to '" + path + "'");
}

CalibrationStats CalibrationStats::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open stats file '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != "eqstats v1")
    throw ParseError("stats file '" + path + "': missing 'eqstats v1' header");
  CalibrationStats out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id;
    TensorStat s;
    if (!std::getline(ss, id, '\t') || !(ss >> s.min >> s.max >> s.samples) || s.min > s.max)
      throw ParseError("stats file '" + path + "': bad record at line " +
                       std::to_string(lineno));
    out.stats_[id] = s;
  }
  return out;
}

namespace {

void require_unquantized(const Graph& g, const char* pass) {
  if (g.meta.quant != QuantTag::None)
    throw InvalidState(std::string(pass) + ": graph is already quantized (tag '" +
                       quant_tag_name(g.meta.quant) + "')");
}

// Per-channel symmetric int8 params along the innermost axis.
QuantParams channel_symmetric(const Tensor& w) {
  const int64_t cout = w.shape().back();
  std::vector<float> max_abs(static_cast<std::size_t>(cout), 0.0f);
  const auto vals = w.f32();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const std::size_t c = i % static_cast<std::size_t>(cout);
    max_abs[c] = std::max(max_abs[c], std::abs(vals[i]));
  }
  std::vector<float> scales(static_cast<std::size_t>(cout));
  for (int64_t c = 0; c < cout; ++c)
    scales[c] = max_abs[c] > 0.0f ? max_abs[c] / 127.0f : 1.0f;
  return QuantParams::per_channel(static_cast<int>(w.rank()) - 1, std::move(scales),
                                  std::vector<int32_t>(static_cast<std::size_t>(cout), 0),
                                  /*symmetric=*/true);
}

QuantParams tensor_symmetric(const Tensor& w) {
  float max_abs = 0.0f;
  for (const float v : w.f32()) max_abs = std::max(max_abs, std::abs(v));
  return choose_qparams_symmetric(max_abs);
}

// Quantizes the weight of one matmul-like node in place; returns false when
// the node kind carries no quantizable weight.
bool quantize_node_weight(Node* n, bool per_tensor, int64_t min_elements) {
  const bool is_fc = std::holds_alternative<FullyConnectedAttrs>(n->kind);
  if (!is_matmul_like(n->kind)) return false;
  Tensor& w = n->weights.at(0);
  if (w.numel() < min_elements) return false;
  const QuantParams qp =
      (is_fc || per_tensor) ? tensor_symmetric(w) : channel_symmetric(w);
  w = quantize_affine(w, qp);
  return true;
}

float scale_of(const QuantParams& qp, int64_t channel) {
  return qp.granularity == Granularity::PerChannel
             ? qp.scales[static_cast<std::size_t>(channel)]
             : qp.scales[0];
}

}  // namespace

Graph quantize_fp16(const Graph& g) {
  require_unquantized(g, "quantize_fp16");
  Graph out = g;
  for (Node& n : out.nodes)
    for (Tensor& w : n.weights)
      if (w.dtype() == DType::F32) w = tensor_to_f16(w);
  out.meta.quant = QuantTag::Fp16;
  return out;
}

Graph quantize_dynamic(const Graph& g, bool per_tensor_weights) {
  require_unquantized(g, "quantize_dynamic");
  Graph out = fold_batchnorm(g);
  for (Node& n : out.nodes)
    quantize_node_weight(&n, per_tensor_weights, kDynamicSizeThreshold);
  out.meta.quant = QuantTag::Dynamic;
  return out;
}

CalibrationStats calibrate(const Graph& g, const std::vector<Tensor>& batches, int max_batches,
                           int threads) {
  require_unquantized(g, "calibrate");
  if (batches.empty()) throw InvalidArgument("calibrate: no representative batches");
  if (max_batches < 1) throw InvalidArgument("calibrate: max_batches must be positive");
  const Graph folded = fold_batchnorm(g);
  CalibrationStats stats;
  RunOptions opts;
  opts.threads = threads;
  opts.observer = [&stats](const std::string& id, const Tensor& value) {
    stats.observe(id, value);
  };
  const std::size_t n = std::min<std::size_t>(batches.size(), static_cast<std::size_t>(max_batches));
  for (std::size_t i = 0; i < n; ++i) run(folded, batches[i], ExecMode::F32, opts);
  return stats;
}

Graph quantize_full(const Graph& g, const CalibrationStats& stats, bool per_tensor_weights) {
  require_unquantized(g, "quantize_full");
  if (stats.empty()) throw CalibrationError("quantize_full: calibration stats required");
  Graph folded = fold_batchnorm(g);

  // Effective activation qparams per tensor id, as seen by downstream nodes.
  std::unordered_map<std::string, QuantParams> eff;

  Graph out;
  out.input = folded.input;
  out.meta = folded.meta;
  out.outputs = folded.outputs;

  auto stat_for = [&stats](const std::string& id) -> const TensorStat& {
    const TensorStat* s = stats.find(id);
    if (!s)
      throw CalibrationError("quantize_full: no calibration record for tensor '" + id + "'");
    return *s;
  };

  // Boundary: quantize the input once.
  const TensorStat& in_stat = stat_for(kInputId);
  Node qin;
  qin.id = "quantize_input";
  qin.kind = QuantizeAttrs{};
  qin.inputs = {kInputId};
  qin.out_qparams = choose_qparams_asymmetric(in_stat.min, in_stat.max);
  eff[qin.id] = *qin.out_qparams;
  out.nodes.push_back(std::move(qin));

  int dequant_count = 0;
  for (const Node& src : folded.nodes) {
    Node n = src;
    for (std::string& in : n.inputs)
      if (in == kInputId) in = "quantize_input";

    struct Visitor {
      Node& n;
      Graph& out;
      std::unordered_map<std::string, QuantParams>& eff;
      const CalibrationStats& stats;
      bool per_tensor;
      int& dequant_count;

      const QuantParams& in_qp(std::size_t i = 0) const {
        auto it = eff.find(n.inputs.at(i));
        if (it == eff.end())
          throw CalibrationError("quantize_full: '" + n.id + "' consumes non-int8 tensor '" +
                                 n.inputs.at(i) + "'");
        return it->second;
      }

      QuantParams own_qp() const {
        const TensorStat* s = stats.find(n.id);
        if (!s)
          throw CalibrationError("quantize_full: no calibration record for tensor '" + n.id +
                                 "'");
        return choose_qparams_asymmetric(s->min, s->max);
      }

      void matmul_common(bool has_bias, bool is_fc) {
        const QuantParams input_qp = in_qp();
        Tensor& w = n.weights.at(0);
        const QuantParams wqp = (is_fc || per_tensor) ? tensor_symmetric(w) : channel_symmetric(w);
        w = quantize_affine(w, wqp);
        const int64_t cout = w.shape().back();
        n.out_qparams = own_qp();
        const float s_in = input_qp.scale();
        const float s_out = n.out_qparams->scale();
        n.requant.clear();
        for (int64_t oc = 0; oc < cout; ++oc) {
          const double target = static_cast<double>(s_in) * scale_of(wqp, oc) / s_out;
          n.requant.push_back(FixedPointMultiplier::from_double(target));
        }
        if (has_bias) {
          Tensor& b = n.weights.at(1);
          Tensor bq = Tensor::zeros(b.shape(), DType::I32);
          auto bsrc = b.f32();
          auto bdst = bq.i32();
          for (int64_t oc = 0; oc < cout; ++oc) {
            const double s_b = static_cast<double>(s_in) * scale_of(wqp, oc);
            const double q = round_half_even(bsrc[oc] / s_b);
            bdst[oc] = static_cast<int32_t>(
                std::clamp(q, static_cast<double>(std::numeric_limits<int32_t>::min()),
                           static_cast<double>(std::numeric_limits<int32_t>::max())));
          }
          b = std::move(bq);
        }
        eff[n.id] = *n.out_qparams;
      }

      void operator()(Conv2dAttrs& a) { matmul_common(a.has_bias, false); }
      void operator()(DepthwiseConv2dAttrs& a) { matmul_common(a.has_bias, false); }
      void operator()(FullyConnectedAttrs& a) { matmul_common(a.has_bias, true); }
      void operator()(BatchNormAttrs&) {
        throw UnsupportedPattern("quantize_full: unfolded batch norm '" + n.id + "'");
      }
      // relu/relu6 and pooling keep their input's quantization grid.
      void passthrough() {
        n.out_qparams = in_qp();
        eff[n.id] = *n.out_qparams;
      }
      void operator()(ReluAttrs&) { passthrough(); }
      void operator()(Relu6Attrs&) { passthrough(); }
      void operator()(MaxPoolAttrs&) { passthrough(); }
      void operator()(AvgPoolAttrs&) { passthrough(); }
      void operator()(GlobalAvgPoolAttrs&) { passthrough(); }
      void operator()(SiluAttrs&) {
        n.out_qparams = own_qp();
        eff[n.id] = *n.out_qparams;
      }
      void operator()(SqueezeExciteAttrs&) {
        in_qp();  // must be int8 upstream
        n.out_qparams = own_qp();
        eff[n.id] = *n.out_qparams;
      }
      void operator()(AddAttrs&) { requant_operands(); }
      void operator()(ConcatAttrs&) { requant_operands(); }
      void requant_operands() {
        n.out_qparams = own_qp();
        const float s_out = n.out_qparams->scale();
        n.requant.clear();
        for (std::size_t i = 0; i < n.inputs.size(); ++i)
          n.requant.push_back(FixedPointMultiplier::from_double(
              static_cast<double>(in_qp(i).scale()) / s_out));
        eff[n.id] = *n.out_qparams;
      }
      void operator()(SoftmaxAttrs&) {
        // Fence the integer region: dequantize right before the softmax.
        in_qp();
        Node deq;
        deq.id = "dequantize_" + std::to_string(dequant_count++);
        deq.kind = DequantizeAttrs{};
        deq.inputs = n.inputs;
        out.nodes.push_back(std::move(deq));
        n.inputs = {out.nodes.back().id};
      }
      void operator()(QuantizeAttrs&) {
        throw InvalidState("quantize_full: graph already contains quantize nodes");
      }
      void operator()(DequantizeAttrs&) {
        throw InvalidState("quantize_full: graph already contains dequantize nodes");
      }
    };
    std::visit(Visitor{n, out, eff, stats, per_tensor_weights, dequant_count}, n.kind);
    out.nodes.push_back(std::move(n));
  }

  out.meta.quant = QuantTag::FullInt;
  out.validate();
  return out;
}

}  // namespace eq
