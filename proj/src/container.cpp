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

#include "edgequant/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace eq {
namespace {

static_assert(std::endian::native == std::endian::little,
              "container IO assumes a little-endian host");

using nlohmann::json;

constexpr char kMagic[4] = {'E', 'Q', 'M', '1'};
constexpr int kVersion = 1;

std::size_t align8(std::size_t n) { return (n + 7) & ~std::size_t{7}; }

[[noreturn]] void fail(const std::string& what) { throw ParseError("container: " + what); }

json pad_to_json(const Padding& p) {
  switch (p.mode) {
    case PadMode::Valid: return json{{"mode", "valid"}};
    case PadMode::Same: return json{{"mode", "same"}};
    case PadMode::Explicit: return json{{"mode", "explicit"}, {"amount", p.amount}};
  }
  fail("bad padding mode");
}

Padding pad_from_json(const json& j, const std::string& ctx) {
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "valid") return Padding::valid();
  if (mode == "same") return Padding::same();
  if (mode == "explicit") return Padding::explicit_pad(j.at("amount").get<int>());
  fail(ctx + ": unknown padding mode '" + mode + "'");
}

json qparams_to_json(const QuantParams& qp) {
  json j;
  j["granularity"] = qp.granularity == Granularity::PerTensor ? "per_tensor" : "per_channel";
  j["axis"] = qp.axis;
  j["scales"] = json::array();
  for (float s : qp.scales) j["scales"].push_back(static_cast<double>(s));
  j["zero_points"] = qp.zero_points;
  j["symmetric"] = qp.symmetric;
  return j;
}

QuantParams qparams_from_json(const json& j, const std::string& ctx) {
  QuantParams qp;
  const std::string g = j.at("granularity").get<std::string>();
  if (g == "per_tensor")
    qp.granularity = Granularity::PerTensor;
  else if (g == "per_channel")
    qp.granularity = Granularity::PerChannel;
  else
    fail(ctx + ": unknown granularity '" + g + "'");
  qp.axis = j.at("axis").get<int>();
  for (const auto& s : j.at("scales")) qp.scales.push_back(static_cast<float>(s.get<double>()));
  qp.zero_points = j.at("zero_points").get<std::vector<int32_t>>();
  qp.symmetric = j.at("symmetric").get<bool>();
  try {
    qp.validate();
  } catch (const Error& e) {
    fail(ctx + ": " + e.what());
  }
  return qp;
}

json attrs_to_json(const NodeKind& kind) {
  struct Visitor {
    json operator()(const Conv2dAttrs& a) {
      return json{{"kh", a.kh},         {"kw", a.kw},
                  {"stride", a.stride}, {"pad", pad_to_json(a.pad)},
                  {"groups", a.groups}, {"has_bias", a.has_bias}};
    }
    json operator()(const DepthwiseConv2dAttrs& a) {
      return json{{"kh", a.kh},
                  {"kw", a.kw},
                  {"stride", a.stride},
                  {"pad", pad_to_json(a.pad)},
                  {"has_bias", a.has_bias}};
    }
    json operator()(const FullyConnectedAttrs& a) { return json{{"has_bias", a.has_bias}}; }
    json operator()(const BatchNormAttrs& a) {
      return json{{"eps", static_cast<double>(a.eps)}};
    }
    json operator()(const ReluAttrs&) { return json::object(); }
    json operator()(const Relu6Attrs&) { return json::object(); }
    json operator()(const SiluAttrs&) { return json::object(); }
    json operator()(const MaxPoolAttrs& a) {
      return json{{"k", a.k},
                  {"stride", a.stride},
                  {"pad", pad_to_json(a.pad)},
                  {"ceil_mode", a.ceil_mode}};
    }
    json operator()(const AvgPoolAttrs& a) {
      return json{{"k", a.k},
                  {"stride", a.stride},
                  {"pad", pad_to_json(a.pad)},
                  {"ceil_mode", a.ceil_mode}};
    }
    json operator()(const GlobalAvgPoolAttrs&) { return json::object(); }
    json operator()(const AddAttrs&) { return json::object(); }
    json operator()(const ConcatAttrs& a) { return json{{"axis", a.axis}}; }
    json operator()(const SoftmaxAttrs&) { return json::object(); }
    json operator()(const QuantizeAttrs&) { return json::object(); }
    json operator()(const DequantizeAttrs&) { return json::object(); }
    json operator()(const SqueezeExciteAttrs& a) {
      return json{{"ratio", static_cast<double>(a.ratio)}};
    }
  };
  return std::visit(Visitor{}, kind);
}

NodeKind attrs_from_json(const std::string& op, const json& j, const std::string& ctx) {
  if (op == "conv2d") {
    Conv2dAttrs a;
    a.kh = j.at("kh").get<int>();
    a.kw = j.at("kw").get<int>();
    a.stride = j.at("stride").get<int>();
    a.pad = pad_from_json(j.at("pad"), ctx);
    a.groups = j.at("groups").get<int>();
    a.has_bias = j.at("has_bias").get<bool>();
    return a;
  }
  if (op == "depthwise_conv2d") {
    DepthwiseConv2dAttrs a;
    a.kh = j.at("kh").get<int>();
    a.kw = j.at("kw").get<int>();
    a.stride = j.at("stride").get<int>();
    a.pad = pad_from_json(j.at("pad"), ctx);
    a.has_bias = j.at("has_bias").get<bool>();
    return a;
  }
  if (op == "fully_connected") return FullyConnectedAttrs{j.at("has_bias").get<bool>()};
  if (op == "batch_norm")
    return BatchNormAttrs{static_cast<float>(j.at("eps").get<double>())};
  if (op == "relu") return ReluAttrs{};
  if (op == "relu6") return Relu6Attrs{};
  if (op == "silu") return SiluAttrs{};
  if (op == "max_pool" || op == "avg_pool") {
    const int k = j.at("k").get<int>();
    const int stride = j.at("stride").get<int>();
    const Padding pad = pad_from_json(j.at("pad"), ctx);
    const bool ceil = j.at("ceil_mode").get<bool>();
    if (op == "max_pool") return MaxPoolAttrs{k, stride, pad, ceil};
    return AvgPoolAttrs{k, stride, pad, ceil};
  }
  if (op == "global_avg_pool") return GlobalAvgPoolAttrs{};
  if (op == "add") return AddAttrs{};
  if (op == "concat") return ConcatAttrs{j.at("axis").get<int>()};
  if (op == "softmax") return SoftmaxAttrs{};
  if (op == "quantize") return QuantizeAttrs{};
  if (op == "dequantize") return DequantizeAttrs{};
  if (op == "squeeze_excite")
    return SqueezeExciteAttrs{static_cast<float>(j.at("ratio").get<double>())};
  fail(ctx + ": unknown op '" + op + "'");
}

}  // namespace

std::vector<std::byte> serialize_model(const Graph& g) {
  g.validate();
  json header;
  header["format"] = "EQM1";
  header["version"] = kVersion;
  header["meta"] = {{"family", g.meta.family},
                    {"num_classes", g.meta.num_classes},
                    {"quant", quant_tag_name(g.meta.quant)},
                    {"class_names", g.meta.class_names}};
  header["input"] = {{"n", g.input.n},
                     {"h", g.input.h},
                     {"w", g.input.w},
                     {"c", g.input.c},
                     {"dtype", dtype_name(g.input.dtype)}};
  header["outputs"] = g.outputs;

  json tensors = json::array();
  std::vector<const Tensor*> order;
  std::size_t offset = 0;

  json nodes = json::array();
  for (const Node& n : g.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["op"] = kind_name(n.kind);
    jn["attrs"] = attrs_to_json(n.kind);
    jn["inputs"] = n.inputs;
    json refs = json::array();
    for (const Tensor& w : n.weights) {
      offset = align8(offset);
      json jt;
      jt["dtype"] = dtype_name(w.dtype());
      jt["shape"] = w.shape();
      jt["offset"] = offset;
      jt["length"] = w.byte_size();
      if (w.has_qparams()) jt["qparams"] = qparams_to_json(w.qparams());
      refs.push_back(tensors.size());
      tensors.push_back(std::move(jt));
      order.push_back(&w);
      offset += w.byte_size();
    }
    jn["weights"] = std::move(refs);
    if (n.out_qparams) jn["out_qparams"] = qparams_to_json(*n.out_qparams);
    if (!n.requant.empty()) {
      json jr = json::array();
      for (const FixedPointMultiplier& m : n.requant)
        jr.push_back(json{{"m0", m.m0}, {"shift", m.shift}});
      jn["requant"] = std::move(jr);
    }
    nodes.push_back(std::move(jn));
  }
  header["nodes"] = std::move(nodes);
  header["tensors"] = std::move(tensors);
  header["payload_size"] = offset;

  const std::string htext = header.dump();
  if (htext.size() > 0xFFFFFFFFull) throw InvalidArgument("container: header too large");
  const std::size_t payload_start = align8(8 + htext.size());

  std::vector<std::byte> out(payload_start + offset, std::byte{0});
  std::memcpy(out.data(), kMagic, 4);
  const uint32_t hlen = static_cast<uint32_t>(htext.size());
  std::memcpy(out.data() + 4, &hlen, 4);
  std::memcpy(out.data() + 8, htext.data(), htext.size());

  std::size_t cur = 0;
  for (const Tensor* t : order) {
    cur = align8(cur);
    std::memcpy(out.data() + payload_start + cur, t->raw().data(), t->byte_size());
    cur += t->byte_size();
  }
  return out;
}

Graph deserialize_model(std::span<const std::byte> bytes) {
  if (bytes.size() < 8) fail("truncated: shorter than the fixed 8-byte prelude");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) fail("bad magic, expected EQM1");
  uint32_t hlen = 0;
  std::memcpy(&hlen, bytes.data() + 4, 4);
  if (8 + static_cast<std::size_t>(hlen) > bytes.size())
    fail("header length " + std::to_string(hlen) + " exceeds file size");

  json header;
  const char* htext = reinterpret_cast<const char*>(bytes.data()) + 8;
  try {
    header = json::parse(htext, htext + hlen);
  } catch (const json::exception& e) {
    fail(std::string("header is not valid JSON: ") + e.what());
  }

  const std::size_t payload_start = align8(8 + hlen);
  Graph g;
  try {
    if (header.at("version").get<int>() != kVersion)
      fail("unsupported version " + header.at("version").dump());
    const json& meta = header.at("meta");
    g.meta.family = meta.at("family").get<std::string>();
    g.meta.num_classes = meta.at("num_classes").get<int>();
    g.meta.quant = quant_tag_from_name(meta.at("quant").get<std::string>());
    g.meta.class_names = meta.at("class_names").get<std::vector<std::string>>();
    const json& in = header.at("input");
    g.input = InputSpec{in.at("n").get<int64_t>(), in.at("h").get<int64_t>(),
                        in.at("w").get<int64_t>(), in.at("c").get<int64_t>(),
                        dtype_from_name(in.at("dtype").get<std::string>())};
    g.outputs = header.at("outputs").get<std::vector<std::string>>();

    const json& jtensors = header.at("tensors");
    const std::size_t payload_size = header.at("payload_size").get<std::size_t>();
    if (payload_start + payload_size > bytes.size())
      fail("payload extends past end of file");

    std::vector<Tensor> pool;
    pool.reserve(jtensors.size());
    for (std::size_t i = 0; i < jtensors.size(); ++i) {
      const json& jt = jtensors[i];
      const std::string rec = "tensor record " + std::to_string(i);
      const DType dtype = dtype_from_name(jt.at("dtype").get<std::string>());
      const auto shape = jt.at("shape").get<std::vector<int64_t>>();
      const std::size_t off = jt.at("offset").get<std::size_t>();
      const std::size_t len = jt.at("length").get<std::size_t>();
      if (off % 8 != 0) fail(rec + ": offset not 8-byte aligned");
      if (off + len > payload_size) fail(rec + ": extends past payload end");
      Tensor t = Tensor::zeros(shape, dtype);
      if (t.byte_size() != len)
        fail(rec + ": length " + std::to_string(len) + " does not match shape");
      std::memcpy(t.raw().data(), bytes.data() + payload_start + off, len);
      if (jt.contains("qparams")) t.set_qparams(qparams_from_json(jt.at("qparams"), rec));
      try {
        t.validate(rec);
      } catch (const Error& e) {
        fail(e.what());
      }
      pool.push_back(std::move(t));
    }

    for (const json& jn : header.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<std::string>();
      const std::string ctx = "node '" + n.id + "'";
      n.kind = attrs_from_json(jn.at("op").get<std::string>(), jn.at("attrs"), ctx);
      n.inputs = jn.at("inputs").get<std::vector<std::string>>();
      for (const auto& ref : jn.at("weights")) {
        const std::size_t idx = ref.get<std::size_t>();
        if (idx >= pool.size()) fail(ctx + ": weight ref " + std::to_string(idx) + " no such tensor");
        n.weights.push_back(pool[idx]);
      }
      if (jn.contains("out_qparams"))
        n.out_qparams = qparams_from_json(jn.at("out_qparams"), ctx);
      if (jn.contains("requant")) {
        for (const json& jm : jn.at("requant"))
          n.requant.push_back(
              FixedPointMultiplier{jm.at("m0").get<int32_t>(), jm.at("shift").get<int32_t>()});
      }
      g.nodes.push_back(std::move(n));
    }
  } catch (const json::exception& e) {
    fail(std::string("header field missing or mistyped: ") + e.what());
  }

  try {
    g.validate();
  } catch (const Error& e) {
    fail(std::string("decoded graph is invalid: ") + e.what());
  }
  return g;
}

void save_model(const Graph& g, const std::string& path) {
  const std::vector<std::byte> bytes = serialize_model(g);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("short write to '" + path + "'");
}

Graph load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw DataError("cannot open model file '" + path + "'");
  const std::streamsize size = f.tellg();
  f.seekg(0);
  std::vector<std::byte> bytes(static_cast<std::size_t>(size));
  f.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!f) throw DataError("short read from '" + path + "'");
  return deserialize_model(bytes);
}

}  // namespace eq
