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

#include "edgequant/builders.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "edgequant/errors.hpp"

namespace eq {
namespace {

// Deterministic across platforms: mt19937_64 output mapped to [0,1) by an
// explicit bit shift instead of std::uniform_real_distribution, whose
// algorithm is implementation-defined.
class InitRng {
 public:
  explicit InitRng(uint64_t seed) : gen_(seed) {}

  float uniform(float lo, float hi) {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return static_cast<float>(lo + (static_cast<double>(hi) - lo) * u);
  }

 private:
  std::mt19937_64 gen_;
};

Tensor he_uniform(const std::vector<int64_t>& shape, int64_t fan_in, InitRng* rng) {
  Tensor t = Tensor::zeros(shape, DType::F32);
  const float bound = static_cast<float>(std::sqrt(6.0 / static_cast<double>(fan_in)));
  auto w = t.f32();
  for (auto& v : w) v = rng->uniform(-bound, bound);
  return t;
}

Tensor filled(const std::vector<int64_t>& shape, float value) {
  Tensor t = Tensor::zeros(shape, DType::F32);
  for (auto& v : t.f32()) v = value;
  return t;
}

class GraphBuilder {
 public:
  GraphBuilder(Family family, int num_classes, int h, int w, uint64_t seed)
      : rng_(seed) {
    graph_.meta.family = family_name(family);
    graph_.meta.num_classes = num_classes;
    graph_.input = InputSpec{1, h, w, 3, DType::F32};
    channels_[std::string(kInputId)] = 3;
  }

  int64_t channels(const std::string& id) const { return channels_.at(id); }

  std::string conv(const std::string& id, const std::string& from, int64_t cout, int kh, int kw,
                   int stride, Padding pad, bool bias, int groups = 1) {
    const int64_t cin = channels_.at(from);
    Conv2dAttrs a;
    a.kh = kh;
    a.kw = kw;
    a.stride = stride;
    a.pad = pad;
    a.groups = groups;
    a.has_bias = bias;
    Node n;
    n.id = id;
    n.kind = a;
    n.inputs = {from};
    n.weights.push_back(
        he_uniform({kh, kw, cin / groups, cout}, static_cast<int64_t>(kh) * kw * (cin / groups),
                   &rng_));
    if (bias) n.weights.push_back(Tensor::zeros({cout}, DType::F32));
    push(std::move(n), cout);
    return id;
  }

  std::string depthwise(const std::string& id, const std::string& from, int k, int stride,
                        Padding pad, bool bias) {
    const int64_t c = channels_.at(from);
    DepthwiseConv2dAttrs a;
    a.kh = k;
    a.kw = k;
    a.stride = stride;
    a.pad = pad;
    a.has_bias = bias;
    Node n;
    n.id = id;
    n.kind = a;
    n.inputs = {from};
    n.weights.push_back(he_uniform({k, k, 1, c}, static_cast<int64_t>(k) * k, &rng_));
    if (bias) n.weights.push_back(Tensor::zeros({c}, DType::F32));
    push(std::move(n), c);
    return id;
  }

  std::string bn(const std::string& id, const std::string& from, float eps) {
    const int64_t c = channels_.at(from);
    BatchNormAttrs a;
    a.eps = eps;
    Node n;
    n.id = id;
    n.kind = a;
    n.inputs = {from};
    n.weights.push_back(filled({c}, 1.0f));           // gamma
    n.weights.push_back(Tensor::zeros({c}, DType::F32));  // beta
    n.weights.push_back(Tensor::zeros({c}, DType::F32));  // running mean
    n.weights.push_back(filled({c}, 1.0f));           // running var
    push(std::move(n), c);
    return id;
  }

  std::string relu(const std::string& id, const std::string& from) {
    return unary(id, from, ReluAttrs{});
  }
  std::string relu6(const std::string& id, const std::string& from) {
    return unary(id, from, Relu6Attrs{});
  }
  std::string silu(const std::string& id, const std::string& from) {
    return unary(id, from, SiluAttrs{});
  }
  std::string softmax(const std::string& id, const std::string& from) {
    return unary(id, from, SoftmaxAttrs{});
  }

  std::string maxpool(const std::string& id, const std::string& from, int k, int stride,
                      Padding pad, bool ceil = false) {
    MaxPoolAttrs a;
    a.k = k;
    a.stride = stride;
    a.pad = pad;
    a.ceil_mode = ceil;
    return unary(id, from, a);
  }

  std::string gap(const std::string& id, const std::string& from) {
    return unary(id, from, GlobalAvgPoolAttrs{});
  }

  // FullyConnected flattens its input implicitly, so pass the flat size when
  // the producer is spatial.
  std::string fc(const std::string& id, const std::string& from, int64_t out, bool bias = true,
                 int64_t in_override = 0) {
    const int64_t in = in_override > 0 ? in_override : channels_.at(from);
    FullyConnectedAttrs a;
    a.has_bias = bias;
    Node n;
    n.id = id;
    n.kind = a;
    n.inputs = {from};
    n.weights.push_back(he_uniform({in, out}, in, &rng_));
    if (bias) n.weights.push_back(Tensor::zeros({out}, DType::F32));
    push(std::move(n), out);
    return id;
  }

  std::string add(const std::string& id, const std::string& a, const std::string& b) {
    Node n;
    n.id = id;
    n.kind = AddAttrs{};
    n.inputs = {a, b};
    push(std::move(n), channels_.at(a));
    return id;
  }

  std::string concat(const std::string& id, const std::vector<std::string>& from) {
    Node n;
    n.id = id;
    n.kind = ConcatAttrs{3};
    n.inputs = from;
    int64_t c = 0;
    for (const auto& f : from) c += channels_.at(f);
    push(std::move(n), c);
    return id;
  }

  std::string se(const std::string& id, const std::string& from, int64_t squeeze) {
    const int64_t c = channels_.at(from);
    Node n;
    n.id = id;
    n.kind = SqueezeExciteAttrs{};
    n.inputs = {from};
    n.weights.push_back(he_uniform({1, 1, c, squeeze}, c, &rng_));
    n.weights.push_back(Tensor::zeros({squeeze}, DType::F32));
    n.weights.push_back(he_uniform({1, 1, squeeze, c}, squeeze, &rng_));
    n.weights.push_back(Tensor::zeros({c}, DType::F32));
    push(std::move(n), c);
    return id;
  }

  Graph finish(const std::string& output) {
    graph_.outputs = {output};
    graph_.validate();
    return std::move(graph_);
  }

 private:
  template <typename Attrs>
  std::string unary(const std::string& id, const std::string& from, Attrs a) {
    Node n;
    n.id = id;
    n.kind = a;
    n.inputs = {from};
    push(std::move(n), channels_.at(from));
    return id;
  }

  void push(Node n, int64_t out_channels) {
    channels_[n.id] = out_channels;
    graph_.nodes.push_back(std::move(n));
  }

  Graph graph_;
  InitRng rng_;
  std::map<std::string, int64_t> channels_;
};

// conv(no bias) + batchnorm + relu, the GoogLeNet/ResNet basic unit.
std::string conv_bn_act(GraphBuilder* b, const std::string& prefix, const std::string& from,
                        int64_t cout, int k, int stride, Padding pad, float eps,
                        const char* act = "relu") {
  auto c = b->conv(prefix + ".conv", from, cout, k, k, stride, pad, /*bias=*/false);
  auto n = b->bn(prefix + ".bn", c, eps);
  if (act == nullptr) return n;
  const std::string a = prefix + "." + act;
  if (std::string(act) == "relu") return b->relu(a, n);
  if (std::string(act) == "relu6") return b->relu6(a, n);
  return b->silu(a, n);
}

Graph build_vgg16(int num_classes, int h, int w, uint64_t seed) {
  if (h != 224 || w != 224)
    throw InvalidArgument("vgg16 requires 224x224 input, got " + std::to_string(h) + "x" +
                          std::to_string(w));
  GraphBuilder b(Family::Vgg16, num_classes, h, w, seed);
  const int plan[5][2] = {{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}};
  std::string cur(kInputId);
  int idx = 0;
  for (int stage = 0; stage < 5; ++stage) {
    for (int i = 0; i < plan[stage][1]; ++i, ++idx) {
      const std::string p = "features." + std::to_string(idx);
      cur = b.conv(p + ".conv", cur, plan[stage][0], 3, 3, 1, Padding::explicit_pad(1), true);
      cur = b.relu(p + ".relu", cur);
    }
    cur = b.maxpool("pool" + std::to_string(stage + 1), cur, 2, 2, Padding::valid());
  }
  cur = b.fc("classifier.0", cur, 4096, true, 512 * 7 * 7);
  cur = b.relu("classifier.0.relu", cur);
  cur = b.fc("classifier.3", cur, 4096);
  cur = b.relu("classifier.3.relu", cur);
  cur = b.fc("classifier.6", cur, num_classes);
  return b.finish(b.softmax("softmax", cur));
}

Graph build_resnet18(int num_classes, int h, int w, uint64_t seed) {
  GraphBuilder b(Family::ResNet18, num_classes, h, w, seed);
  constexpr float kEps = 1e-5f;
  std::string cur =
      b.conv("conv1", std::string(kInputId), 64, 7, 7, 2, Padding::explicit_pad(3), false);
  cur = b.bn("bn1", cur, kEps);
  cur = b.relu("relu1", cur);
  cur = b.maxpool("maxpool", cur, 3, 2, Padding::explicit_pad(1));

  const int64_t widths[4] = {64, 128, 256, 512};
  for (int stage = 0; stage < 4; ++stage) {
    for (int block = 0; block < 2; ++block) {
      const std::string p = "layer" + std::to_string(stage + 1) + "." + std::to_string(block);
      const int stride = (stage > 0 && block == 0) ? 2 : 1;
      const bool down = stride != 1 || b.channels(cur) != widths[stage];
      std::string skip = cur;
      if (down) {
        skip = b.conv(p + ".downsample.conv", cur, widths[stage], 1, 1, stride,
                      Padding::explicit_pad(0), false);
        skip = b.bn(p + ".downsample.bn", skip, kEps);
      }
      std::string y =
          b.conv(p + ".conv1", cur, widths[stage], 3, 3, stride, Padding::explicit_pad(1), false);
      y = b.bn(p + ".bn1", y, kEps);
      y = b.relu(p + ".relu1", y);
      y = b.conv(p + ".conv2", y, widths[stage], 3, 3, 1, Padding::explicit_pad(1), false);
      y = b.bn(p + ".bn2", y, kEps);
      y = b.add(p + ".add", y, skip);
      cur = b.relu(p + ".relu2", y);
    }
  }
  cur = b.gap("avgpool", cur);
  cur = b.fc("fc", cur, num_classes);
  return b.finish(b.softmax("softmax", cur));
}

Graph build_mobilenet_v2(int num_classes, int h, int w, uint64_t seed) {
  GraphBuilder b(Family::MobileNetV2, num_classes, h, w, seed);
  constexpr float kEps = 1e-5f;
  std::string cur = conv_bn_act(&b, "features.0", std::string(kInputId), 32, 3, 2,
                                Padding::explicit_pad(1), kEps, "relu6");
  struct Setting {
    int t, c, n, s;
  };
  const Setting settings[] = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2}, {6, 64, 4, 2},
                              {6, 96, 3, 1},  {6, 160, 3, 2}, {6, 320, 1, 1}};
  int idx = 1;
  for (const auto& s : settings) {
    for (int i = 0; i < s.n; ++i, ++idx) {
      const std::string p = "features." + std::to_string(idx);
      const int stride = i == 0 ? s.s : 1;
      const int64_t in = b.channels(cur);
      const int64_t hidden = in * s.t;
      std::string y = cur;
      if (s.t != 1)
        y = conv_bn_act(&b, p + ".expand", y, hidden, 1, 1, Padding::explicit_pad(0), kEps,
                        "relu6");
      y = b.depthwise(p + ".dw", y, 3, stride, Padding::explicit_pad(1), false);
      y = b.bn(p + ".dw.bn", y, kEps);
      y = b.relu6(p + ".dw.relu6", y);
      y = conv_bn_act(&b, p + ".project", y, s.c, 1, 1, Padding::explicit_pad(0), kEps, nullptr);
      cur = (stride == 1 && in == s.c) ? b.add(p + ".add", y, cur) : y;
    }
  }
  cur = conv_bn_act(&b, "features.18", cur, 1280, 1, 1, Padding::explicit_pad(0), kEps, "relu6");
  cur = b.gap("avgpool", cur);
  cur = b.fc("classifier", cur, num_classes);
  return b.finish(b.softmax("softmax", cur));
}

Graph build_googlenet(int num_classes, int h, int w, uint64_t seed) {
  GraphBuilder b(Family::GoogLeNet, num_classes, h, w, seed);
  constexpr float kEps = 1e-3f;
  auto basic = [&](const std::string& p, const std::string& from, int64_t cout, int k, int stride,
                   int pad) {
    return conv_bn_act(&b, p, from, cout, k, stride, Padding::explicit_pad(pad), kEps, "relu");
  };
  // Inception branch 3 uses 3x3 kernels; the parameter totals depend on it.
  auto inception = [&](const std::string& p, const std::string& from, int64_t c1, int64_t c3r,
                       int64_t c3, int64_t c5r, int64_t c5, int64_t proj) {
    auto b1 = basic(p + ".branch1", from, c1, 1, 1, 0);
    auto b2 = basic(p + ".branch2.1", basic(p + ".branch2.0", from, c3r, 1, 1, 0), c3, 3, 1, 1);
    auto b3 = basic(p + ".branch3.1", basic(p + ".branch3.0", from, c5r, 1, 1, 0), c5, 3, 1, 1);
    auto b4 = basic(p + ".branch4.1",
                    b.maxpool(p + ".branch4.pool", from, 3, 1, Padding::explicit_pad(1), true),
                    proj, 1, 1, 0);
    return b.concat(p + ".concat", {b1, b2, b3, b4});
  };

  std::string cur = basic("conv1", std::string(kInputId), 64, 7, 2, 3);
  cur = b.maxpool("maxpool1", cur, 3, 2, Padding::explicit_pad(0), true);
  cur = basic("conv2", cur, 64, 1, 1, 0);
  cur = basic("conv3", cur, 192, 3, 1, 1);
  cur = b.maxpool("maxpool2", cur, 3, 2, Padding::explicit_pad(0), true);
  cur = inception("inception3a", cur, 64, 96, 128, 16, 32, 32);
  cur = inception("inception3b", cur, 128, 128, 192, 32, 96, 64);
  cur = b.maxpool("maxpool3", cur, 3, 2, Padding::explicit_pad(0), true);
  cur = inception("inception4a", cur, 192, 96, 208, 16, 48, 64);
  cur = inception("inception4b", cur, 160, 112, 224, 24, 64, 64);
  cur = inception("inception4c", cur, 128, 128, 256, 24, 64, 64);
  cur = inception("inception4d", cur, 112, 144, 288, 32, 64, 64);
  cur = inception("inception4e", cur, 256, 160, 320, 32, 128, 128);
  cur = b.maxpool("maxpool4", cur, 2, 2, Padding::explicit_pad(0), true);
  cur = inception("inception5a", cur, 256, 160, 320, 32, 128, 128);
  cur = inception("inception5b", cur, 384, 192, 384, 48, 128, 128);
  cur = b.gap("avgpool", cur);
  cur = b.fc("fc", cur, num_classes);
  return b.finish(b.softmax("softmax", cur));
}

Graph build_efficientnet_b0(int num_classes, int h, int w, uint64_t seed) {
  GraphBuilder b(Family::EfficientNetB0, num_classes, h, w, seed);
  constexpr float kEps = 1e-5f;
  std::string cur = conv_bn_act(&b, "features.0", std::string(kInputId), 32, 3, 2,
                                Padding::explicit_pad(1), kEps, "silu");
  struct Setting {
    int t, c, n, s, k;
  };
  const Setting settings[] = {{1, 16, 1, 1, 3}, {6, 24, 2, 2, 3},  {6, 40, 2, 2, 5},
                              {6, 80, 3, 2, 3}, {6, 112, 3, 1, 5}, {6, 192, 4, 2, 5},
                              {6, 320, 1, 1, 3}};
  int stage = 1;
  for (const auto& s : settings) {
    for (int i = 0; i < s.n; ++i) {
      const std::string p =
          "features." + std::to_string(stage) + "." + std::to_string(i);
      const int stride = i == 0 ? s.s : 1;
      const int64_t in = b.channels(cur);
      const int64_t hidden = in * s.t;
      // Squeeze width derives from the block input, not the expanded width.
      const int64_t squeeze = std::max<int64_t>(1, in / 4);
      std::string y = cur;
      if (s.t != 1)
        y = conv_bn_act(&b, p + ".expand", y, hidden, 1, 1, Padding::explicit_pad(0), kEps,
                        "silu");
      y = b.depthwise(p + ".dw", y, s.k, stride, Padding::explicit_pad((s.k - 1) / 2), false);
      y = b.bn(p + ".dw.bn", y, kEps);
      y = b.silu(p + ".dw.silu", y);
      y = b.se(p + ".se", y, squeeze);
      y = conv_bn_act(&b, p + ".project", y, s.c, 1, 1, Padding::explicit_pad(0), kEps, nullptr);
      cur = (stride == 1 && in == s.c) ? b.add(p + ".add", y, cur) : y;
    }
    ++stage;
  }
  cur = conv_bn_act(&b, "features.8", cur, 1280, 1, 1, Padding::explicit_pad(0), kEps, "silu");
  cur = b.gap("avgpool", cur);
  cur = b.fc("classifier", cur, num_classes);
  return b.finish(b.softmax("softmax", cur));
}

Graph build_tiny_cnn(int num_classes, int h, int w, uint64_t seed, const TinyCnnConfig& cfg) {
  if (cfg.width < 1 || cfg.depth < 1)
    throw InvalidArgument("tiny_cnn width and depth must be positive");
  const int pools = cfg.depth - 1;
  if ((h >> pools) < 1 || (w >> pools) < 1 || h % (1 << pools) != 0 || w % (1 << pools) != 0)
    throw InvalidArgument("tiny_cnn depth " + std::to_string(cfg.depth) +
                          " needs input divisible by " + std::to_string(1 << pools));
  GraphBuilder b(Family::TinyCnn, num_classes, h, w, seed);
  std::string cur(kInputId);
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string p = "block" + std::to_string(i);
    cur = b.conv(p + ".conv", cur, static_cast<int64_t>(cfg.width) << i, 3, 3, 1,
                 Padding::explicit_pad(1), true);
    cur = b.relu(p + ".relu", cur);
    if (i + 1 < cfg.depth) cur = b.maxpool(p + ".pool", cur, 2, 2, Padding::valid());
  }
  cur = b.gap("avgpool", cur);
  cur = b.fc("fc", cur, num_classes);
  return b.finish(b.softmax("softmax", cur));
}

}  // namespace

Family family_from_string(const std::string& name) {
  if (name == "vgg16") return Family::Vgg16;
  if (name == "googlenet") return Family::GoogLeNet;
  if (name == "resnet18") return Family::ResNet18;
  if (name == "mobilenet_v2") return Family::MobileNetV2;
  if (name == "efficientnet_b0") return Family::EfficientNetB0;
  if (name == "tiny_cnn") return Family::TinyCnn;
  throw InvalidArgument("unknown architecture: " + name);
}

const char* family_name(Family f) {
  switch (f) {
    case Family::Vgg16: return "vgg16";
    case Family::GoogLeNet: return "googlenet";
    case Family::ResNet18: return "resnet18";
    case Family::MobileNetV2: return "mobilenet_v2";
    case Family::EfficientNetB0: return "efficientnet_b0";
    case Family::TinyCnn: return "tiny_cnn";
  }
  throw InvalidArgument("unknown architecture enum");
}

std::pair<int, int> default_input_size(Family family) {
  switch (family) {
    case Family::Vgg16: return {224, 224};
    case Family::TinyCnn: return {64, 64};
    default: return {224, 224};
  }
}

Graph build_architecture(Family family, int num_classes, std::pair<int, int> input_size,
                         uint64_t init_seed, const TinyCnnConfig& tiny) {
  if (num_classes < 2) throw InvalidArgument("num_classes must be at least 2");
  const int h = input_size.first;
  const int w = input_size.second;
  if (h < 1 || w < 1) throw InvalidArgument("input size must be positive");
  if (family != Family::TinyCnn && (h < 32 || w < 32))
    throw InvalidArgument("input size too small for " + std::string(family_name(family)));
  switch (family) {
    case Family::Vgg16: return build_vgg16(num_classes, h, w, init_seed);
    case Family::GoogLeNet: return build_googlenet(num_classes, h, w, init_seed);
    case Family::ResNet18: return build_resnet18(num_classes, h, w, init_seed);
    case Family::MobileNetV2: return build_mobilenet_v2(num_classes, h, w, init_seed);
    case Family::EfficientNetB0: return build_efficientnet_b0(num_classes, h, w, init_seed);
    case Family::TinyCnn: return build_tiny_cnn(num_classes, h, w, init_seed, tiny);
  }
  throw InvalidArgument("unknown architecture enum");
}

}  // namespace eq
