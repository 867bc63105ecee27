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

#ifndef EDGEQUANT_TESTS_ORACLE_HPP_
#define EDGEQUANT_TESTS_ORACLE_HPP_

// Reference implementations used only by the test suite. Everything here is
// written as plain scalar loops over f64 buffers, independent of the library's
// kernels, so the two can be compared against each other.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "edgequant/graph.hpp"
#include "edgequant/tensor.hpp"

namespace oracle {

struct Array {
  std::vector<int64_t> shape;
  std::vector<double> v;

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }
};

inline Array from_tensor(const eq::Tensor& t) {
  Array a;
  a.shape = t.shape();
  const auto s = t.f32();
  a.v.assign(s.begin(), s.end());
  return a;
}

inline eq::Tensor to_tensor_f32(const Array& a) {
  std::vector<float> f(a.v.size());
  for (std::size_t i = 0; i < a.v.size(); ++i) f[i] = static_cast<float>(a.v[i]);
  return eq::Tensor::from_f32(a.shape, std::move(f));
}

// Padding amounts recomputed from the documented convention: valid = none,
// explicit = symmetric, same = minimal total padding so that
// out = ceil(in / stride).
inline void pads(int64_t in, int k, int stride, const eq::Padding& p, int64_t* before,
                 int64_t* after) {
  if (p.mode == eq::PadMode::Valid) {
    *before = *after = 0;
  } else if (p.mode == eq::PadMode::Explicit) {
    *before = *after = p.amount;
  } else {
    const int64_t out = (in + stride - 1) / stride;
    const int64_t total = std::max<int64_t>(0, (out - 1) * stride + k - in);
    *before = total / 2;
    *after = total - *before;
  }
}

inline int64_t out_size(int64_t in, int k, int stride, const eq::Padding& p, bool ceil_mode) {
  int64_t b = 0, a = 0;
  pads(in, k, stride, p, &b, &a);
  const int64_t span = in + b + a - k;
  if (span < 0) throw std::runtime_error("oracle: window larger than input");
  return ceil_mode ? (span + stride - 1) / stride + 1 : span / stride + 1;
}

// x: (n,h,w,cin); w: (kh,kw,cin/groups,cout). Plain quadruple loop.
inline Array conv2d(const Array& x, const Array& w, const Array* bias,
                    const eq::Conv2dAttrs& at) {
  const int64_t n = x.shape[0], h = x.shape[1], wd = x.shape[2], cin = x.shape[3];
  const int64_t cout = w.shape[3], cpg = w.shape[2];
  const int64_t g = at.groups, ocpg = cout / g;
  int64_t pt = 0, pa = 0, pl = 0;
  pads(h, at.kh, at.stride, at.pad, &pt, &pa);
  pads(wd, at.kw, at.stride, at.pad, &pl, &pa);
  const int64_t oh = out_size(h, at.kh, at.stride, at.pad, false);
  const int64_t ow = out_size(wd, at.kw, at.stride, at.pad, false);
  Array y{{n, oh, ow, cout}, std::vector<double>(static_cast<std::size_t>(n * oh * ow * cout))};
  for (int64_t img = 0; img < n; ++img)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t oc = 0; oc < cout; ++oc) {
          const int64_t grp = oc / ocpg;
          double acc = bias ? bias->v[static_cast<std::size_t>(oc)] : 0.0;
          for (int ky = 0; ky < at.kh; ++ky) {
            const int64_t iy = oy * at.stride - pt + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < at.kw; ++kx) {
              const int64_t ix = ox * at.stride - pl + kx;
              if (ix < 0 || ix >= wd) continue;
              for (int64_t ic = 0; ic < cpg; ++ic) {
                const double xv = x.v[static_cast<std::size_t>(
                    ((img * h + iy) * wd + ix) * cin + grp * cpg + ic)];
                const double wv = w.v[static_cast<std::size_t>(
                    ((static_cast<int64_t>(ky) * at.kw + kx) * cpg + ic) * cout + oc)];
                acc += xv * wv;
              }
            }
          }
          y.v[static_cast<std::size_t>(((img * oh + oy) * ow + ox) * cout + oc)] = acc;
        }
  return y;
}

// w: (kh,kw,1,c).
inline Array depthwise(const Array& x, const Array& w, const Array* bias,
                       const eq::DepthwiseConv2dAttrs& at) {
  const int64_t n = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3];
  int64_t pt = 0, pa = 0, pl = 0;
  pads(h, at.kh, at.stride, at.pad, &pt, &pa);
  pads(wd, at.kw, at.stride, at.pad, &pl, &pa);
  const int64_t oh = out_size(h, at.kh, at.stride, at.pad, false);
  const int64_t ow = out_size(wd, at.kw, at.stride, at.pad, false);
  Array y{{n, oh, ow, c}, std::vector<double>(static_cast<std::size_t>(n * oh * ow * c))};
  for (int64_t img = 0; img < n; ++img)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t ch = 0; ch < c; ++ch) {
          double acc = bias ? bias->v[static_cast<std::size_t>(ch)] : 0.0;
          for (int ky = 0; ky < at.kh; ++ky) {
            const int64_t iy = oy * at.stride - pt + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < at.kw; ++kx) {
              const int64_t ix = ox * at.stride - pl + kx;
              if (ix < 0 || ix >= wd) continue;
              acc += x.v[static_cast<std::size_t>(((img * h + iy) * wd + ix) * c + ch)] *
                     w.v[static_cast<std::size_t>((static_cast<int64_t>(ky) * at.kw + kx) * c +
                                                  ch)];
            }
          }
          y.v[static_cast<std::size_t>(((img * oh + oy) * ow + ox) * c + ch)] = acc;
        }
  return y;
}

// Input gradient of a convolution: the transposed convolution of dy with the
// same weights (scatter form). Shapes as in conv2d with groups == 1.
inline Array conv2d_input_grad(const Array& dy, const Array& w, const std::vector<int64_t>& xs,
                               const eq::Conv2dAttrs& at) {
  const int64_t n = xs[0], h = xs[1], wd = xs[2], cin = xs[3];
  const int64_t cout = w.shape[3];
  int64_t pt = 0, pa = 0, pl = 0;
  pads(h, at.kh, at.stride, at.pad, &pt, &pa);
  pads(wd, at.kw, at.stride, at.pad, &pl, &pa);
  const int64_t oh = dy.shape[1], ow = dy.shape[2];
  Array dx{xs, std::vector<double>(static_cast<std::size_t>(n * h * wd * cin))};
  for (int64_t img = 0; img < n; ++img)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t oc = 0; oc < cout; ++oc) {
          const double gy =
              dy.v[static_cast<std::size_t>(((img * oh + oy) * ow + ox) * cout + oc)];
          for (int ky = 0; ky < at.kh; ++ky) {
            const int64_t iy = oy * at.stride - pt + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < at.kw; ++kx) {
              const int64_t ix = ox * at.stride - pl + kx;
              if (ix < 0 || ix >= wd) continue;
              for (int64_t ic = 0; ic < cin; ++ic)
                dx.v[static_cast<std::size_t>(((img * h + iy) * wd + ix) * cin + ic)] +=
                    gy * w.v[static_cast<std::size_t>(
                             ((static_cast<int64_t>(ky) * at.kw + kx) * cin + ic) * cout + oc)];
            }
          }
        }
  return dx;
}

inline Array fully_connected(const Array& x, const Array& w, const Array* bias) {
  const int64_t n = x.shape[0];
  const int64_t flat = x.numel() / n;
  const int64_t out = w.shape[1];
  Array y{{n, out}, std::vector<double>(static_cast<std::size_t>(n * out))};
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < out; ++j) {
      double acc = bias ? bias->v[static_cast<std::size_t>(j)] : 0.0;
      for (int64_t k = 0; k < flat; ++k)
        acc += x.v[static_cast<std::size_t>(i * flat + k)] *
               w.v[static_cast<std::size_t>(k * out + j)];
      y.v[static_cast<std::size_t>(i * out + j)] = acc;
    }
  return y;
}

inline Array batchnorm(const Array& x, const Array& gamma, const Array& beta, const Array& mean,
                       const Array& var, double eps) {
  const int64_t c = x.shape.back();
  Array y{x.shape, std::vector<double>(x.v.size())};
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    const std::size_t ch = i % static_cast<std::size_t>(c);
    y.v[i] = (x.v[i] - mean.v[ch]) / std::sqrt(var.v[ch] + eps) * gamma.v[ch] + beta.v[ch];
  }
  return y;
}

inline Array relu(const Array& x) {
  Array y = x;
  for (double& v : y.v) v = std::max(0.0, v);
  return y;
}

inline Array relu6(const Array& x) {
  Array y = x;
  for (double& v : y.v) v = std::clamp(v, 0.0, 6.0);
  return y;
}

inline Array silu(const Array& x) {
  Array y = x;
  for (double& v : y.v) v = v / (1.0 + std::exp(-v));
  return y;
}

inline Array maxpool(const Array& x, const eq::MaxPoolAttrs& at) {
  const int64_t n = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3];
  int64_t pt = 0, pa = 0, pl = 0;
  pads(h, at.k, at.stride, at.pad, &pt, &pa);
  pads(wd, at.k, at.stride, at.pad, &pl, &pa);
  const int64_t oh = out_size(h, at.k, at.stride, at.pad, at.ceil_mode);
  const int64_t ow = out_size(wd, at.k, at.stride, at.pad, at.ceil_mode);
  Array y{{n, oh, ow, c}, std::vector<double>(static_cast<std::size_t>(n * oh * ow * c))};
  for (int64_t img = 0; img < n; ++img)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t ch = 0; ch < c; ++ch) {
          double best = -std::numeric_limits<double>::infinity();
          bool seen = false;
          for (int ky = 0; ky < at.k; ++ky) {
            const int64_t iy = oy * at.stride - pt + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < at.k; ++kx) {
              const int64_t ix = ox * at.stride - pl + kx;
              if (ix < 0 || ix >= wd) continue;
              best = std::max(best,
                              x.v[static_cast<std::size_t>(((img * h + iy) * wd + ix) * c + ch)]);
              seen = true;
            }
          }
          y.v[static_cast<std::size_t>(((img * oh + oy) * ow + ox) * c + ch)] = seen ? best : 0.0;
        }
  return y;
}

// Padded cells are excluded from the divisor.
inline Array avgpool(const Array& x, const eq::AvgPoolAttrs& at) {
  const int64_t n = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3];
  int64_t pt = 0, pa = 0, pl = 0;
  pads(h, at.k, at.stride, at.pad, &pt, &pa);
  pads(wd, at.k, at.stride, at.pad, &pl, &pa);
  const int64_t oh = out_size(h, at.k, at.stride, at.pad, at.ceil_mode);
  const int64_t ow = out_size(wd, at.k, at.stride, at.pad, at.ceil_mode);
  Array y{{n, oh, ow, c}, std::vector<double>(static_cast<std::size_t>(n * oh * ow * c))};
  for (int64_t img = 0; img < n; ++img)
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t ch = 0; ch < c; ++ch) {
          double sum = 0.0;
          int64_t cnt = 0;
          for (int ky = 0; ky < at.k; ++ky) {
            const int64_t iy = oy * at.stride - pt + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < at.k; ++kx) {
              const int64_t ix = ox * at.stride - pl + kx;
              if (ix < 0 || ix >= wd) continue;
              sum += x.v[static_cast<std::size_t>(((img * h + iy) * wd + ix) * c + ch)];
              ++cnt;
            }
          }
          y.v[static_cast<std::size_t>(((img * oh + oy) * ow + ox) * c + ch)] =
              cnt > 0 ? sum / static_cast<double>(cnt) : 0.0;
        }
  return y;
}

inline Array global_avgpool(const Array& x) {
  const int64_t n = x.shape[0], hw = x.shape[1] * x.shape[2], c = x.shape[3];
  Array y{{n, 1, 1, c}, std::vector<double>(static_cast<std::size_t>(n * c))};
  for (int64_t img = 0; img < n; ++img)
    for (int64_t ch = 0; ch < c; ++ch) {
      double sum = 0.0;
      for (int64_t i = 0; i < hw; ++i)
        sum += x.v[static_cast<std::size_t>((img * hw + i) * c + ch)];
      y.v[static_cast<std::size_t>(img * c + ch)] = sum / static_cast<double>(hw);
    }
  return y;
}

inline Array add(const Array& a, const Array& b) {
  Array y = a;
  for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += b.v[i];
  return y;
}

inline Array concat_channels(const std::vector<const Array*>& xs) {
  const int64_t n = xs[0]->shape[0], h = xs[0]->shape[1], w = xs[0]->shape[2];
  int64_t ctot = 0;
  for (const Array* x : xs) ctot += x->shape[3];
  Array y{{n, h, w, ctot}, std::vector<double>(static_cast<std::size_t>(n * h * w * ctot))};
  for (int64_t r = 0; r < n * h * w; ++r) {
    int64_t off = 0;
    for (const Array* x : xs) {
      const int64_t c = x->shape[3];
      for (int64_t ch = 0; ch < c; ++ch)
        y.v[static_cast<std::size_t>(r * ctot + off + ch)] =
            x->v[static_cast<std::size_t>(r * c + ch)];
      off += c;
    }
  }
  return y;
}

inline Array softmax(const Array& x) {
  const int64_t n = x.shape[0];
  const int64_t k = x.numel() / n;
  Array y{x.shape, std::vector<double>(x.v.size())};
  for (int64_t i = 0; i < n; ++i) {
    double mx = x.v[static_cast<std::size_t>(i * k)];
    for (int64_t j = 1; j < k; ++j)
      mx = std::max(mx, x.v[static_cast<std::size_t>(i * k + j)]);
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      const double e = std::exp(x.v[static_cast<std::size_t>(i * k + j)] - mx);
      y.v[static_cast<std::size_t>(i * k + j)] = e;
      sum += e;
    }
    for (int64_t j = 0; j < k; ++j) y.v[static_cast<std::size_t>(i * k + j)] /= sum;
  }
  return y;
}

inline Array squeeze_excite(const Array& x, const Array& w1, const Array& b1, const Array& w2,
                            const Array& b2) {
  const int64_t n = x.shape[0], hw = x.shape[1] * x.shape[2], c = x.shape[3];
  const int64_t sq = w1.shape[3];
  Array y = x;
  for (int64_t img = 0; img < n; ++img) {
    std::vector<double> s(static_cast<std::size_t>(c), 0.0);
    for (int64_t i = 0; i < hw; ++i)
      for (int64_t ch = 0; ch < c; ++ch)
        s[static_cast<std::size_t>(ch)] +=
            x.v[static_cast<std::size_t>((img * hw + i) * c + ch)];
    for (double& v : s) v /= static_cast<double>(hw);
    std::vector<double> z1(static_cast<std::size_t>(sq));
    for (int64_t j = 0; j < sq; ++j) {
      double acc = b1.v[static_cast<std::size_t>(j)];
      for (int64_t ch = 0; ch < c; ++ch)
        acc += s[static_cast<std::size_t>(ch)] * w1.v[static_cast<std::size_t>(ch * sq + j)];
      z1[static_cast<std::size_t>(j)] = acc / (1.0 + std::exp(-acc));
    }
    for (int64_t ch = 0; ch < c; ++ch) {
      double acc = b2.v[static_cast<std::size_t>(ch)];
      for (int64_t j = 0; j < sq; ++j)
        acc += z1[static_cast<std::size_t>(j)] * w2.v[static_cast<std::size_t>(j * c + ch)];
      const double gate = 1.0 / (1.0 + std::exp(-acc));
      for (int64_t i = 0; i < hw; ++i)
        y.v[static_cast<std::size_t>((img * hw + i) * c + ch)] *= gate;
    }
  }
  return y;
}

// Executes an unquantized graph in f64, returning every node output keyed by
// id (the input itself is stored under "input").
inline std::map<std::string, Array> run_graph(const eq::Graph& g, const Array& input) {
  std::map<std::string, Array> vals;
  vals.emplace(eq::kInputId, input);
  for (const eq::Node& n : g.nodes) {
    std::vector<const Array*> in;
    in.reserve(n.inputs.size());
    for (const std::string& id : n.inputs) in.push_back(&vals.at(id));
    std::vector<Array> w;
    w.reserve(n.weights.size());
    for (const eq::Tensor& t : n.weights) w.push_back(from_tensor(t));
    Array out;
    if (const auto* a = std::get_if<eq::Conv2dAttrs>(&n.kind)) {
      out = conv2d(*in[0], w[0], a->has_bias ? &w[1] : nullptr, *a);
    } else if (const auto* a = std::get_if<eq::DepthwiseConv2dAttrs>(&n.kind)) {
      out = depthwise(*in[0], w[0], a->has_bias ? &w[1] : nullptr, *a);
    } else if (const auto* a = std::get_if<eq::FullyConnectedAttrs>(&n.kind)) {
      out = fully_connected(*in[0], w[0], a->has_bias ? &w[1] : nullptr);
    } else if (const auto* a = std::get_if<eq::BatchNormAttrs>(&n.kind)) {
      out = batchnorm(*in[0], w[0], w[1], w[2], w[3], a->eps);
    } else if (std::holds_alternative<eq::ReluAttrs>(n.kind)) {
      out = relu(*in[0]);
    } else if (std::holds_alternative<eq::Relu6Attrs>(n.kind)) {
      out = relu6(*in[0]);
    } else if (std::holds_alternative<eq::SiluAttrs>(n.kind)) {
      out = silu(*in[0]);
    } else if (const auto* a = std::get_if<eq::MaxPoolAttrs>(&n.kind)) {
      out = maxpool(*in[0], *a);
    } else if (const auto* a = std::get_if<eq::AvgPoolAttrs>(&n.kind)) {
      out = avgpool(*in[0], *a);
    } else if (std::holds_alternative<eq::GlobalAvgPoolAttrs>(n.kind)) {
      out = global_avgpool(*in[0]);
    } else if (std::holds_alternative<eq::AddAttrs>(n.kind)) {
      out = add(*in[0], *in[1]);
    } else if (std::holds_alternative<eq::ConcatAttrs>(n.kind)) {
      out = concat_channels(in);
    } else if (std::holds_alternative<eq::SoftmaxAttrs>(n.kind)) {
      out = softmax(*in[0]);
    } else if (std::holds_alternative<eq::SqueezeExciteAttrs>(n.kind)) {
      out = squeeze_excite(*in[0], w[0], w[1], w[2], w[3]);
    } else {
      throw std::runtime_error("oracle: unsupported node kind");
    }
    vals.emplace(n.id, std::move(out));
  }
  return vals;
}

// Mean cross-entropy of the logits feeding the trailing softmax.
inline double graph_loss(const eq::Graph& g, const Array& input,
                         const std::vector<int>& labels) {
  auto vals = run_graph(g, input);
  const eq::Node& last = g.nodes.back();
  if (!std::holds_alternative<eq::SoftmaxAttrs>(last.kind))
    throw std::runtime_error("oracle: graph must end in softmax");
  const Array& logits = vals.at(last.inputs[0]);
  const int64_t n = logits.shape[0];
  const int64_t k = logits.numel() / n;
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double mx = logits.v[static_cast<std::size_t>(i * k)];
    for (int64_t j = 1; j < k; ++j)
      mx = std::max(mx, logits.v[static_cast<std::size_t>(i * k + j)]);
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j)
      sum += std::exp(logits.v[static_cast<std::size_t>(i * k + j)] - mx);
    const double z = logits.v[static_cast<std::size_t>(i * k + labels[static_cast<std::size_t>(i)])];
    loss += mx + std::log(sum) - z;
  }
  return loss / static_cast<double>(n);
}

// Central finite difference of graph_loss with respect to one stored weight
// element, honoring the actual f32 values after each perturbation.
inline double fd_weight_grad(eq::Graph g, const std::string& node_id, std::size_t tensor_idx,
                             int64_t elem, const Array& input, const std::vector<int>& labels,
                             double h = 1e-3) {
  eq::Node* node = g.find(node_id);
  float* w = node->weights[tensor_idx].f32().data() + elem;
  const float w0 = *w;
  *w = static_cast<float>(static_cast<double>(w0) + h);
  const double wp = static_cast<double>(*w);
  const double lp = graph_loss(g, input, labels);
  *w = static_cast<float>(static_cast<double>(w0) - h);
  const double wm = static_cast<double>(*w);
  const double lm = graph_loss(g, input, labels);
  *w = w0;
  return (lp - lm) / (wp - wm);
}

// f64 reference for fixed-point requantization.
inline int64_t requant_ref(int32_t acc, double multiplier) {
  return std::llround(static_cast<double>(acc) * multiplier);
}

// Scalar align-corners-false bilinear resize of an HWC image.
inline Array bilinear(const Array& img, int64_t oh, int64_t ow) {
  const int64_t h = img.shape[0], w = img.shape[1], c = img.shape[2];
  Array y{{oh, ow, c}, std::vector<double>(static_cast<std::size_t>(oh * ow * c))};
  for (int64_t oy = 0; oy < oh; ++oy) {
    const double sy = std::clamp((oy + 0.5) * static_cast<double>(h) / static_cast<double>(oh) - 0.5,
                                 0.0, static_cast<double>(h - 1));
    const int64_t y0 = static_cast<int64_t>(std::floor(sy));
    const int64_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (int64_t ox = 0; ox < ow; ++ox) {
      const double sx = std::clamp(
          (ox + 0.5) * static_cast<double>(w) / static_cast<double>(ow) - 0.5, 0.0,
          static_cast<double>(w - 1));
      const int64_t x0 = static_cast<int64_t>(std::floor(sx));
      const int64_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      for (int64_t ch = 0; ch < c; ++ch) {
        const auto px = [&](int64_t yy, int64_t xx) {
          return img.v[static_cast<std::size_t>((yy * w + xx) * c + ch)];
        };
        y.v[static_cast<std::size_t>((oy * ow + ox) * c + ch)] =
            px(y0, x0) * (1 - fy) * (1 - fx) + px(y0, x1) * (1 - fy) * fx +
            px(y1, x0) * fy * (1 - fx) + px(y1, x1) * fy * fx;
      }
    }
  }
  return y;
}

// Relative deviation max|a-b| / max(max|b|, floor).
inline double rel_err(const std::vector<float>& a, const std::vector<double>& b,
                      double floor = 1e-12) {
  double num = 0.0, den = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(static_cast<double>(a[i]) - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

inline void fill_uniform(eq::Tensor& t, std::mt19937_64& gen, float lo, float hi) {
  for (float& v : t.f32())
    v = lo + (hi - lo) * static_cast<float>((gen() >> 11) * 0x1.0p-53);
}

}  // namespace oracle

#endif  // EDGEQUANT_TESTS_ORACLE_HPP_
