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

#include "edgequant/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <variant>

#include "edgequant/errors.hpp"
#include "edgequant/threading.hpp"
#include "kernels.hpp"

namespace eq {
namespace {

// c[m,n] += sum_r a[r,m] * b[r,n]. One worker per output row: deterministic.
void matmul_at_b(const float* a, const float* b, float* c, int64_t r, int64_t m, int64_t n,
                 int threads) {
  parallel_for(m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      float* crow = c + i * n;
      for (int64_t rr = 0; rr < r; ++rr) {
        const float av = a[rr * m + i];
        if (av == 0.0f) continue;
        const float* brow = b + rr * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

// c[m,n] = sum_k a[m,k] * b[n,k].
void matmul_a_bt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
                 int threads) {
  parallel_for(m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const float* arow = a + i * k;
      float* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) {
        const float* brow = b + j * k;
        float acc = 0.0f;
        for (int64_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
        crow[j] = acc;
      }
    }
  });
}

void im2col_image(const float* img, int64_t h, int64_t w, int64_t c, int kh, int kw, int stride,
                  const kernels::Geometry& g, float* cols) {
  const int64_t row_len = static_cast<int64_t>(kh) * kw * c;
  for (int64_t oy = 0; oy < g.oh; ++oy) {
    for (int64_t ox = 0; ox < g.ow; ++ox) {
      float* row = cols + (oy * g.ow + ox) * row_len;
      for (int ky = 0; ky < kh; ++ky) {
        const int64_t iy = oy * stride - g.pad_top + ky;
        for (int kx = 0; kx < kw; ++kx) {
          const int64_t ix = ox * stride - g.pad_left + kx;
          float* dst = row + (static_cast<int64_t>(ky) * kw + kx) * c;
          if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
            std::fill(dst, dst + c, 0.0f);
          } else {
            const float* src = img + (iy * w + ix) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
    }
  }
}

// Scatter-add of column gradients back onto the input image. Sequential:
// several columns touch the same input cell.
void col2im_image(const float* cols, int64_t h, int64_t w, int64_t c, int kh, int kw, int stride,
                  const kernels::Geometry& g, float* dimg) {
  const int64_t row_len = static_cast<int64_t>(kh) * kw * c;
  for (int64_t oy = 0; oy < g.oh; ++oy) {
    for (int64_t ox = 0; ox < g.ow; ++ox) {
      const float* row = cols + (oy * g.ow + ox) * row_len;
      for (int ky = 0; ky < kh; ++ky) {
        const int64_t iy = oy * stride - g.pad_top + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int64_t ix = ox * stride - g.pad_left + kx;
          if (ix < 0 || ix >= w) continue;
          const float* src = row + (static_cast<int64_t>(ky) * kw + kx) * c;
          float* dst = dimg + (iy * w + ix) * c;
          for (int64_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

float silu_grad(float z) {
  const float s = kernels::sigmoid(z);
  return s * (1.0f + z * (1.0f - s));
}

struct Tape {
  std::unordered_map<std::string, Tensor> values;
  std::unordered_map<std::string, std::vector<int64_t>> pool_argmax;
  const Node* softmax = nullptr;
  std::string logits_id;
};

const Tensor* bias_of(const Node& n, bool has_bias) {
  return has_bias && n.weights.size() > 1 ? &n.weights[1] : nullptr;
}

Tape forward_to_logits(const Graph& g, const Tensor& batch, int threads) {
  if (batch.dtype() != DType::F32 || batch.rank() != 4)
    throw InvalidArgument("train: batch must be a rank-4 f32 NHWC tensor");
  if (batch.dim(1) != g.input.h || batch.dim(2) != g.input.w || batch.dim(3) != g.input.c)
    throw InvalidArgument("train: batch shape does not match the model input");
  if (g.outputs.size() != 1)
    throw UnsupportedPattern("train: requires exactly one output node");
  const Node* out_node = g.find(g.outputs[0]);
  if (!out_node || !std::holds_alternative<SoftmaxAttrs>(out_node->kind))
    throw UnsupportedPattern("train: model must end in a softmax layer");

  Tape t;
  t.softmax = out_node;
  t.logits_id = out_node->inputs.at(0);
  t.values.emplace(kInputId, batch);
  for (const Node& n : g.nodes) {
    if (&n == out_node) continue;  // fused into the loss
    const auto value = [&](std::size_t i) -> const Tensor& {
      return t.values.at(n.inputs.at(i));
    };
    Tensor y = std::visit(
        [&](const auto& a) -> Tensor {
          using A = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<A, Conv2dAttrs>) {
            if (a.groups != 1)
              throw UnsupportedPattern("train: grouped convolution '" + n.id +
                                       "' is not trainable");
            return kernels::conv2d_f32(value(0), n.weights[0], bias_of(n, a.has_bias), a,
                                       threads);
          } else if constexpr (std::is_same_v<A, DepthwiseConv2dAttrs>) {
            return kernels::depthwise_f32(value(0), n.weights[0], bias_of(n, a.has_bias), a,
                                          threads);
          } else if constexpr (std::is_same_v<A, FullyConnectedAttrs>) {
            return kernels::fully_connected_f32(value(0), n.weights[0], bias_of(n, a.has_bias),
                                                threads);
          } else if constexpr (std::is_same_v<A, BatchNormAttrs>) {
            return kernels::batchnorm_f32(value(0), n.weights[0], n.weights[1], n.weights[2],
                                          n.weights[3], a.eps, threads);
          } else if constexpr (std::is_same_v<A, ReluAttrs>) {
            return kernels::relu_f32(value(0), threads);
          } else if constexpr (std::is_same_v<A, Relu6Attrs>) {
            return kernels::relu6_f32(value(0), threads);
          } else if constexpr (std::is_same_v<A, SiluAttrs>) {
            return kernels::silu_f32(value(0), threads);
          } else if constexpr (std::is_same_v<A, MaxPoolAttrs>) {
            return kernels::maxpool_f32(value(0), a, threads, &t.pool_argmax[n.id]);
          } else if constexpr (std::is_same_v<A, AvgPoolAttrs>) {
            return kernels::avgpool_f32(value(0), a, threads);
          } else if constexpr (std::is_same_v<A, GlobalAvgPoolAttrs>) {
            return kernels::global_avgpool_f32(value(0), threads);
          } else if constexpr (std::is_same_v<A, AddAttrs>) {
            return kernels::add_f32(value(0), value(1), threads);
          } else if constexpr (std::is_same_v<A, ConcatAttrs>) {
            if (a.axis != 3)
              throw UnsupportedPattern("train: concat '" + n.id + "' must be on the channel axis");
            std::vector<const Tensor*> xs;
            for (std::size_t i = 0; i < n.inputs.size(); ++i) xs.push_back(&value(i));
            return kernels::concat_channels(xs, threads);
          } else if constexpr (std::is_same_v<A, SqueezeExciteAttrs>) {
            return kernels::squeeze_excite_f32(value(0), n.weights[0], n.weights[1], n.weights[2],
                                               n.weights[3], threads);
          } else {
            throw UnsupportedPattern("train: node '" + n.id + "' (" + kind_name(n.kind) +
                                     ") is not trainable");
          }
        },
        n.kind);
    t.values.emplace(n.id, std::move(y));
  }
  return t;
}

int argmax_row(const float* row, int64_t k) {
  int64_t best = 0;
  for (int64_t j = 1; j < k; ++j)
    if (row[j] > row[best]) best = j;
  return static_cast<int>(best);
}

int64_t count_correct(const Tensor& logits, const std::vector<int>& labels) {
  const int64_t n = logits.dim(0);
  const int64_t k = logits.numel() / n;
  const float* lp = logits.f32().data();
  int64_t correct = 0;
  for (int64_t i = 0; i < n; ++i)
    if (argmax_row(lp + i * k, k) == labels[static_cast<std::size_t>(i)]) ++correct;
  return correct;
}

std::vector<bool> trainable_mask(const Node& n) {
  if (std::holds_alternative<BatchNormAttrs>(n.kind))
    return {true, true, false, false};  // running stats are frozen buffers
  return std::vector<bool>(n.weights.size(), true);
}

// Backward rules for one node. Weight gradients go to `wgrads`; input
// gradients are handed to `emit(input_id, grad)`.
struct NodeBackward {
  const Node& n;
  const Tensor& gy;
  const Tape& tape;
  int threads;
  std::vector<Tensor>* wgrads;
  const std::function<void(const std::string&, Tensor&&)>& emit;

  const Tensor& value(std::size_t i) const { return tape.values.at(n.inputs.at(i)); }

  Tensor bias_grad(int64_t rows, int64_t cout) const {
    Tensor db = Tensor::zeros({cout}, DType::F32);
    float* dbp = db.f32().data();
    const float* gp = gy.f32().data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t oc = 0; oc < cout; ++oc) dbp[oc] += gp[r * cout + oc];
    return db;
  }

  void operator()(const Conv2dAttrs& a) {
    const Tensor& x = value(0);
    const Tensor& w = n.weights[0];
    const auto& xs = x.shape();
    const int64_t batch = xs[0], h = xs[1], ww = xs[2], c = xs[3];
    const int64_t cout = w.dim(3);
    const auto g = kernels::geometry(xs, a.kh, a.kw, a.stride, a.pad);
    const int64_t m = g.oh * g.ow;
    const int64_t kcols = static_cast<int64_t>(a.kh) * a.kw * c;

    Tensor cols = Tensor::zeros({batch * m, kcols}, DType::F32);
    const float* xp = x.f32().data();
    float* cp = cols.f32().data();
    for (int64_t img = 0; img < batch; ++img)
      im2col_image(xp + img * h * ww * c, h, ww, c, a.kh, a.kw, a.stride, g,
                   cp + img * m * kcols);

    Tensor dw = Tensor::zeros(w.shape(), DType::F32);
    matmul_at_b(cp, gy.f32().data(), dw.f32().data(), batch * m, kcols, cout, threads);
    wgrads->push_back(std::move(dw));
    if (a.has_bias) wgrads->push_back(bias_grad(batch * m, cout));

    Tensor dcols = Tensor::zeros({batch * m, kcols}, DType::F32);
    matmul_a_bt(gy.f32().data(), w.f32().data(), dcols.f32().data(), batch * m, cout, kcols,
                threads);
    Tensor dx = Tensor::zeros(x.shape(), DType::F32);
    const float* dcp = dcols.f32().data();
    float* dxp = dx.f32().data();
    for (int64_t img = 0; img < batch; ++img)
      col2im_image(dcp + img * m * kcols, h, ww, c, a.kh, a.kw, a.stride, g,
                   dxp + img * h * ww * c);
    emit(n.inputs[0], std::move(dx));
  }

  void operator()(const DepthwiseConv2dAttrs& a) {
    const Tensor& x = value(0);
    const Tensor& w = n.weights[0];
    const auto& xs = x.shape();
    const int64_t batch = xs[0], h = xs[1], ww = xs[2], c = xs[3];
    const auto g = kernels::geometry(xs, a.kh, a.kw, a.stride, a.pad);

    Tensor dw = Tensor::zeros(w.shape(), DType::F32);
    Tensor dx = Tensor::zeros(x.shape(), DType::F32);
    const float* xp = x.f32().data();
    const float* wp = w.f32().data();
    const float* gp = gy.f32().data();
    float* dwp = dw.f32().data();
    float* dxp = dx.f32().data();
    for (int64_t img = 0; img < batch; ++img) {
      for (int64_t oy = 0; oy < g.oh; ++oy) {
        for (int64_t ox = 0; ox < g.ow; ++ox) {
          const float* grow = gp + ((img * g.oh + oy) * g.ow + ox) * c;
          for (int ky = 0; ky < a.kh; ++ky) {
            const int64_t iy = oy * a.stride - g.pad_top + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < a.kw; ++kx) {
              const int64_t ix = ox * a.stride - g.pad_left + kx;
              if (ix < 0 || ix >= ww) continue;
              const int64_t xoff = ((img * h + iy) * ww + ix) * c;
              const int64_t woff = (static_cast<int64_t>(ky) * a.kw + kx) * c;
              for (int64_t ch = 0; ch < c; ++ch) {
                dwp[woff + ch] += xp[xoff + ch] * grow[ch];
                dxp[xoff + ch] += wp[woff + ch] * grow[ch];
              }
            }
          }
        }
      }
    }
    wgrads->push_back(std::move(dw));
    if (a.has_bias) wgrads->push_back(bias_grad(batch * g.oh * g.ow, c));
    emit(n.inputs[0], std::move(dx));
  }

  void operator()(const FullyConnectedAttrs& a) {
    const Tensor& x = value(0);
    const Tensor& w = n.weights[0];
    const int64_t batch = x.dim(0);
    const int64_t in = x.numel() / batch;
    const int64_t out = w.dim(1);

    Tensor dw = Tensor::zeros(w.shape(), DType::F32);
    matmul_at_b(x.f32().data(), gy.f32().data(), dw.f32().data(), batch, in, out, threads);
    wgrads->push_back(std::move(dw));
    if (a.has_bias) wgrads->push_back(bias_grad(batch, out));

    Tensor dx = Tensor::zeros(x.shape(), DType::F32);
    matmul_a_bt(gy.f32().data(), w.f32().data(), dx.f32().data(), batch, out, in, threads);
    emit(n.inputs[0], std::move(dx));
  }

  void operator()(const BatchNormAttrs& a) {
    const Tensor& x = value(0);
    const int64_t c = n.weights[0].numel();
    const int64_t rows = x.numel() / c;
    const float* xp = x.f32().data();
    const float* gp = gy.f32().data();
    const float* gamma = n.weights[0].f32().data();
    const float* mean = n.weights[2].f32().data();
    const float* var = n.weights[3].f32().data();

    std::vector<float> inv(static_cast<std::size_t>(c));
    for (int64_t ch = 0; ch < c; ++ch)
      inv[static_cast<std::size_t>(ch)] =
          1.0f / std::sqrt(var[ch] + a.eps);

    Tensor dgamma = Tensor::zeros(n.weights[0].shape(), DType::F32);
    Tensor dbeta = Tensor::zeros(n.weights[1].shape(), DType::F32);
    Tensor dx = Tensor::zeros(x.shape(), DType::F32);
    std::vector<double> dg(static_cast<std::size_t>(c), 0.0);
    std::vector<double> db(static_cast<std::size_t>(c), 0.0);
    float* dxp = dx.f32().data();
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t ch = 0; ch < c; ++ch) {
        const float gv = gp[r * c + ch];
        const float iv = inv[static_cast<std::size_t>(ch)];
        db[static_cast<std::size_t>(ch)] += gv;
        dg[static_cast<std::size_t>(ch)] += gv * (xp[r * c + ch] - mean[ch]) * iv;
        dxp[r * c + ch] = gv * gamma[ch] * iv;
      }
    }
    auto dgp = dgamma.f32();
    auto dbp = dbeta.f32();
    for (int64_t ch = 0; ch < c; ++ch) {
      dgp[ch] = static_cast<float>(dg[static_cast<std::size_t>(ch)]);
      dbp[ch] = static_cast<float>(db[static_cast<std::size_t>(ch)]);
    }
    wgrads->push_back(std::move(dgamma));
    wgrads->push_back(std::move(dbeta));
    wgrads->push_back(Tensor::zeros(n.weights[2].shape(), DType::F32));
    wgrads->push_back(Tensor::zeros(n.weights[3].shape(), DType::F32));
    emit(n.inputs[0], std::move(dx));
  }

  void elementwise(const std::function<float(float, float)>& dydx) {
    const Tensor& x = value(0);
    Tensor dx = Tensor::zeros(x.shape(), DType::F32);
    const float* xp = x.f32().data();
    const float* gp = gy.f32().data();
    float* dxp = dx.f32().data();
    for (int64_t i = 0; i < x.numel(); ++i) dxp[i] = dydx(xp[i], gp[i]);
    emit(n.inputs[0], std::move(dx));
  }

  void operator()(const ReluAttrs&) {
    elementwise([](float x, float g) { return x > 0.0f ? g : 0.0f; });
  }

  void operator()(const Relu6Attrs&) {
    elementwise([](float x, float g) { return x > 0.0f && x < 6.0f ? g : 0.0f; });
  }

  void operator()(const SiluAttrs&) {
    elementwise([](float x, float g) { return g * silu_grad(x); });
  }

  void operator()(const MaxPoolAttrs&) {
    const Tensor& x = value(0);
    const auto& am = tape.pool_argmax.at(n.id);
    Tensor dx = Tensor::zeros(x.shape(), DType::F32);
    float* dxp = dx.f32().data();
    const float* gp = gy.f32().data();
    for (std::size_t i = 0; i < am.size(); ++i)
      if (am[i] >= 0) dxp[am[i]] += gp[static_cast<int64_t>(i)];
    emit(n.inputs[0], std::move(dx));
  }

  void operator()(const AvgPoolAttrs& a) {
    const Tensor& x = value(0);
    const auto& xs = x.shape();
    const int64_t batch = xs[0], h = xs[1], w = xs[2], c = xs[3];
    const auto g = kernels::geometry(xs, a.k, a.k, a.stride, a.pad, a.ceil_mode);
    Tensor dx = Tensor::zeros(x.shape(), DType::F32);
    float* dxp = dx.f32().data();
    const float* gp = gy.f32().data();
    for (int64_t img = 0; img < batch; ++img) {
      for (int64_t oy = 0; oy < g.oh; ++oy) {
        for (int64_t ox = 0; ox < g.ow; ++ox) {
          int64_t count = 0;
          for (int ky = 0; ky < a.k; ++ky) {
            const int64_t iy = oy * a.stride - g.pad_top + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < a.k; ++kx) {
              const int64_t ix = ox * a.stride - g.pad_left + kx;
              if (ix >= 0 && ix < w) ++count;
            }
          }
          if (count == 0) continue;
          const float* grow = gp + ((img * g.oh + oy) * g.ow + ox) * c;
          for (int ky = 0; ky < a.k; ++ky) {
            const int64_t iy = oy * a.stride - g.pad_top + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < a.k; ++kx) {
              const int64_t ix = ox * a.stride - g.pad_left + kx;
              if (ix < 0 || ix >= w) continue;
              float* drow = dxp + ((img * h + iy) * w + ix) * c;
              for (int64_t ch = 0; ch < c; ++ch)
                drow[ch] += grow[ch] / static_cast<float>(count);
            }
          }
        }
      }
    }
    emit(n.inputs[0], std::move(dx));
  }

  void operator()(const GlobalAvgPoolAttrs&) {
    const Tensor& x = value(0);
    const auto& xs = x.shape();
    const int64_t batch = xs[0], hw = xs[1] * xs[2], c = xs[3];
    Tensor dx = Tensor::zeros(x.shape(), DType::F32);
    float* dxp = dx.f32().data();
    const float* gp = gy.f32().data();
    for (int64_t img = 0; img < batch; ++img)
      for (int64_t i = 0; i < hw; ++i)
        for (int64_t ch = 0; ch < c; ++ch)
          dxp[(img * hw + i) * c + ch] = gp[img * c + ch] / static_cast<float>(hw);
    emit(n.inputs[0], std::move(dx));
  }

  void operator()(const AddAttrs&) {
    emit(n.inputs[0], Tensor(gy));
    emit(n.inputs[1], Tensor(gy));
  }

  void operator()(const ConcatAttrs&) {
    const int64_t ctotal = gy.shape().back();
    const int64_t rows = gy.numel() / ctotal;
    const float* gp = gy.f32().data();
    int64_t off = 0;
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      const Tensor& xi = value(i);
      const int64_t ci = xi.shape().back();
      Tensor dxi = Tensor::zeros(xi.shape(), DType::F32);
      float* dp = dxi.f32().data();
      for (int64_t r = 0; r < rows; ++r)
        std::copy(gp + r * ctotal + off, gp + r * ctotal + off + ci, dp + r * ci);
      off += ci;
      emit(n.inputs[i], std::move(dxi));
    }
  }

  void operator()(const SqueezeExciteAttrs&) {
    const Tensor& x = value(0);
    const auto& xs = x.shape();
    const int64_t batch = xs[0], hw = xs[1] * xs[2], c = xs[3];
    const int64_t sq = n.weights[0].dim(3);
    const float* xp = x.f32().data();
    const float* gp = gy.f32().data();
    const float* w1 = n.weights[0].f32().data();  // (c, sq)
    const float* b1 = n.weights[1].f32().data();
    const float* w2 = n.weights[2].f32().data();  // (sq, c)
    const float* b2 = n.weights[3].f32().data();

    // Recompute the gate path.
    std::vector<float> s(static_cast<std::size_t>(batch * c));
    for (int64_t img = 0; img < batch; ++img) {
      for (int64_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (int64_t i = 0; i < hw; ++i) sum += xp[(img * hw + i) * c + ch];
        s[static_cast<std::size_t>(img * c + ch)] =
            static_cast<float>(sum / static_cast<double>(hw));
      }
    }
    std::vector<float> z1(static_cast<std::size_t>(batch * sq));
    std::vector<float> a1(z1.size());
    for (int64_t img = 0; img < batch; ++img) {
      for (int64_t j = 0; j < sq; ++j) {
        double acc = b1[j];
        for (int64_t ch = 0; ch < c; ++ch)
          acc += s[static_cast<std::size_t>(img * c + ch)] * w1[ch * sq + j];
        const float z = static_cast<float>(acc);
        z1[static_cast<std::size_t>(img * sq + j)] = z;
        a1[static_cast<std::size_t>(img * sq + j)] = z * kernels::sigmoid(z);
      }
    }
    std::vector<float> gate(static_cast<std::size_t>(batch * c));
    for (int64_t img = 0; img < batch; ++img) {
      for (int64_t ch = 0; ch < c; ++ch) {
        double acc = b2[ch];
        for (int64_t j = 0; j < sq; ++j)
          acc += a1[static_cast<std::size_t>(img * sq + j)] * w2[j * c + ch];
        gate[static_cast<std::size_t>(img * c + ch)] =
            kernels::sigmoid(static_cast<float>(acc));
      }
    }

    // dgate and the direct input path.
    std::vector<float> dgate(static_cast<std::size_t>(batch * c), 0.0f);
    Tensor dx = Tensor::zeros(x.shape(), DType::F32);
    float* dxp = dx.f32().data();
    for (int64_t img = 0; img < batch; ++img) {
      for (int64_t i = 0; i < hw; ++i) {
        for (int64_t ch = 0; ch < c; ++ch) {
          const int64_t idx = (img * hw + i) * c + ch;
          dgate[static_cast<std::size_t>(img * c + ch)] += gp[idx] * xp[idx];
          dxp[idx] = gp[idx] * gate[static_cast<std::size_t>(img * c + ch)];
        }
      }
    }
    // Through the sigmoid, second fc, silu, first fc, and the pooled mean.
    std::vector<float> dz2(static_cast<std::size_t>(batch * c));
    for (std::size_t i = 0; i < dz2.size(); ++i)
      dz2[i] = dgate[i] * gate[i] * (1.0f - gate[i]);

    Tensor dw2 = Tensor::zeros(n.weights[2].shape(), DType::F32);
    Tensor db2 = Tensor::zeros(n.weights[3].shape(), DType::F32);
    matmul_at_b(a1.data(), dz2.data(), dw2.f32().data(), batch, sq, c, threads);
    for (int64_t img = 0; img < batch; ++img)
      for (int64_t ch = 0; ch < c; ++ch)
        db2.f32()[ch] += dz2[static_cast<std::size_t>(img * c + ch)];

    std::vector<float> dz1(static_cast<std::size_t>(batch * sq));
    matmul_a_bt(dz2.data(), w2, dz1.data(), batch, c, sq, threads);
    for (std::size_t i = 0; i < dz1.size(); ++i) dz1[i] *= silu_grad(z1[i]);

    Tensor dw1 = Tensor::zeros(n.weights[0].shape(), DType::F32);
    Tensor db1 = Tensor::zeros(n.weights[1].shape(), DType::F32);
    matmul_at_b(s.data(), dz1.data(), dw1.f32().data(), batch, c, sq, threads);
    for (int64_t img = 0; img < batch; ++img)
      for (int64_t j = 0; j < sq; ++j) db1.f32()[j] += dz1[static_cast<std::size_t>(img * sq + j)];

    std::vector<float> ds(static_cast<std::size_t>(batch * c));
    matmul_a_bt(dz1.data(), w1, ds.data(), batch, sq, c, threads);
    for (int64_t img = 0; img < batch; ++img)
      for (int64_t i = 0; i < hw; ++i)
        for (int64_t ch = 0; ch < c; ++ch)
          dxp[(img * hw + i) * c + ch] +=
              ds[static_cast<std::size_t>(img * c + ch)] / static_cast<float>(hw);

    wgrads->push_back(std::move(dw1));
    wgrads->push_back(std::move(db1));
    wgrads->push_back(std::move(dw2));
    wgrads->push_back(std::move(db2));
    emit(n.inputs[0], std::move(dx));
  }

  void operator()(const SoftmaxAttrs&) {
    throw InvalidState("train: unexpected softmax '" + n.id + "' on the backward path");
  }
  void operator()(const QuantizeAttrs&) {
    throw UnsupportedPattern("train: node '" + n.id + "' is not trainable");
  }
  void operator()(const DequantizeAttrs&) {
    throw UnsupportedPattern("train: node '" + n.id + "' is not trainable");
  }
};

void shuffle_indices(std::vector<int64_t>& idx, std::mt19937_64& gen) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const uint64_t j = gen() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

float lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw InvalidArgument("lr_at: epoch must be non-negative");
  if (cfg.lr_step_epochs < 1) throw InvalidArgument("lr_at: lr_step_epochs must be positive");
  const int steps = epoch / cfg.lr_step_epochs;
  return static_cast<float>(static_cast<double>(cfg.lr0) *
                            std::pow(static_cast<double>(cfg.lr_gamma), steps));
}

CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.dtype() != DType::F32 || logits.rank() < 2)
    throw InvalidArgument("cross_entropy: logits must be f32 with a leading batch dim");
  const int64_t n = logits.dim(0);
  if (n == 0 || static_cast<int64_t>(labels.size()) != n)
    throw InvalidArgument("cross_entropy: label count does not match the batch");
  const int64_t k = logits.numel() / n;
  if (k < 2) throw InvalidArgument("cross_entropy: need at least 2 classes");

  CrossEntropyResult r;
  r.grad = Tensor::zeros(logits.shape(), DType::F32);
  const float* lp = logits.f32().data();
  float* gp = r.grad.f32().data();
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= k)
      throw InvalidArgument("cross_entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(k) + " classes");
    const float* row = lp + i * k;
    double mx = row[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    total += mx + std::log(sum) - row[label];
    for (int64_t j = 0; j < k; ++j)
      gp[i * k + j] = static_cast<float>(
          (std::exp(row[j] - mx) / sum - (j == label ? 1.0 : 0.0)) / static_cast<double>(n));
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

BackwardResult backward(const Graph& g, const Tensor& batch, const std::vector<int>& labels,
                        int threads) {
  if (g.meta.quant != QuantTag::None)
    throw InvalidState("train: model is quantized; backward needs the f32 graph");
  Tape tape = forward_to_logits(g, batch, threads);
  const Tensor& logits = tape.values.at(tape.logits_id);
  CrossEntropyResult ce = cross_entropy(logits, labels);

  BackwardResult out;
  out.loss = ce.loss;
  out.logits = logits;

  std::unordered_map<std::string, Tensor> gmap;
  gmap.emplace(tape.logits_id, std::move(ce.grad));
  const std::function<void(const std::string&, Tensor&&)> emit =
      [&gmap](const std::string& id, Tensor&& delta) {
        auto it = gmap.find(id);
        if (it == gmap.end()) {
          gmap.emplace(id, std::move(delta));
          return;
        }
        float* dst = it->second.f32().data();
        const float* src = delta.f32().data();
        for (int64_t i = 0; i < delta.numel(); ++i) dst[i] += src[i];
      };

  for (auto it = g.nodes.rbegin(); it != g.nodes.rend(); ++it) {
    const Node& n = *it;
    if (&n == tape.softmax) continue;
    auto git = gmap.find(n.id);
    if (git == gmap.end()) continue;  // not on the loss path
    const Tensor gy = std::move(git->second);
    gmap.erase(git);
    std::vector<Tensor> wgrads;
    NodeBackward bw{n, gy, tape, threads, &wgrads, emit};
    std::visit(bw, n.kind);
    if (!n.weights.empty()) out.grads.emplace(n.id, std::move(wgrads));
  }
  return out;
}

std::pair<Graph, TrainReport> train(const Graph& g0, const LabeledDataset& train_ds,
                                    const LabeledDataset& val_ds, const TrainConfig& cfg,
                                    int threads) {
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw InvalidArgument("train: epochs and batch_size must be positive");
  if (!(cfg.lr0 > 0.0f)) throw InvalidArgument("train: lr0 must be positive");
  if (cfg.momentum < 0.0f || cfg.momentum >= 1.0f)
    throw InvalidArgument("train: momentum must be in [0, 1)");
  if (cfg.lr_step_epochs < 1) throw InvalidArgument("train: lr_step_epochs must be positive");
  if (!(cfg.lr_gamma > 0.0f)) throw InvalidArgument("train: lr_gamma must be positive");
  if (cfg.weight_decay < 0.0f) throw InvalidArgument("train: weight_decay must be >= 0");
  if (train_ds.samples.empty() || val_ds.samples.empty())
    throw InvalidArgument("train: datasets must be non-empty");
  if (g0.meta.quant != QuantTag::None)
    throw InvalidState("train: model is quantized; train the f32 model");

  Graph g = g0;
  std::map<std::string, std::vector<Tensor>> velocity;
  for (const Node& node : g.nodes) {
    if (node.weights.empty()) continue;
    std::vector<Tensor> v;
    for (const Tensor& w : node.weights) v.push_back(Tensor::zeros(w.shape(), DType::F32));
    velocity.emplace(node.id, std::move(v));
  }

  const auto eval_accuracy = [&](const LabeledDataset& ds) {
    int64_t correct = 0;
    std::vector<int64_t> idx;
    std::vector<int> labels;
    for (std::size_t pos = 0; pos < ds.samples.size();) {
      idx.clear();
      labels.clear();
      const std::size_t end =
          std::min(ds.samples.size(), pos + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = pos; i < end; ++i) {
        idx.push_back(static_cast<int64_t>(i));
        labels.push_back(ds.samples[i].label);
      }
      Tape t = forward_to_logits(g, batch_of(ds, idx), threads);
      correct += count_correct(t.values.at(t.logits_id), labels);
      pos = end;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.samples.size());
  };

  std::mt19937_64 gen(cfg.seed);
  std::vector<int64_t> order(train_ds.samples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport report;
  Graph best = g;
  double best_val = -1.0;
  int best_epoch = -1;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const float lr = lr_at(epoch, cfg);
    shuffle_indices(order, gen);
    double loss_sum = 0.0;
    int64_t correct = 0, seen = 0;

    for (std::size_t pos = 0; pos < order.size();) {
      const std::size_t end =
          std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
      std::vector<int64_t> idx(order.begin() + static_cast<std::ptrdiff_t>(pos),
                               order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<int> labels;
      for (const int64_t i : idx) labels.push_back(train_ds.samples[static_cast<std::size_t>(i)].label);

      BackwardResult res = backward(g, batch_of(train_ds, idx), labels, threads);
      if (!std::isfinite(res.loss))
        throw InvalidState("train: loss diverged (non-finite) at epoch " +
                           std::to_string(epoch) + "; lower lr0");
      const auto bs = static_cast<int64_t>(idx.size());
      loss_sum += res.loss * static_cast<double>(bs);
      seen += bs;
      correct += count_correct(res.logits, labels);

      for (Node& node : g.nodes) {
        auto git = res.grads.find(node.id);
        if (git == res.grads.end()) continue;
        const std::vector<bool> mask = trainable_mask(node);
        auto& vel = velocity.at(node.id);
        for (std::size_t wi = 0; wi < node.weights.size(); ++wi) {
          if (!mask[wi]) continue;
          auto wp = node.weights[wi].f32();
          auto vp = vel[wi].f32();
          const auto gp = git->second[wi].f32();
          for (int64_t i = 0; i < static_cast<int64_t>(wp.size()); ++i) {
            const float grad = gp[i] + cfg.weight_decay * wp[i];
            vp[i] = cfg.momentum * vp[i] + grad;
            wp[i] -= lr * vp[i];
          }
        }
      }
      pos = end;
    }

    EpochRow row;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    row.val_acc = eval_accuracy(val_ds);
    row.lr = lr;
    report.epochs.push_back(row);
    if (row.val_acc > best_val) {
      best_val = row.val_acc;
      best = g;
      best_epoch = epoch;
    }
  }

  report.best_epoch = best_epoch;
  report.best_val_acc = best_val;
  return {std::move(best), std::move(report)};
}

Graph replace_head(const Graph& g0, int num_classes, uint64_t seed) {
  if (num_classes < 2) throw InvalidArgument("replace_head: need at least 2 classes");
  Graph g = g0;
  Node* fc = nullptr;
  if (!g.nodes.empty()) {
    Node& last = g.nodes.back();
    if (std::holds_alternative<FullyConnectedAttrs>(last.kind)) {
      fc = &last;
    } else if (std::holds_alternative<SoftmaxAttrs>(last.kind) && !last.inputs.empty()) {
      Node* prev = g.find(last.inputs[0]);
      if (prev && std::holds_alternative<FullyConnectedAttrs>(prev->kind)) fc = prev;
    }
  }
  if (!fc)
    throw UnsupportedPattern("replace_head: model does not end in a fully-connected layer");

  const int64_t in = fc->weights.at(0).dim(0);
  const float bound = static_cast<float>(std::sqrt(6.0 / static_cast<double>(in)));
  std::mt19937_64 gen(seed);
  Tensor w = Tensor::zeros({in, num_classes}, DType::F32);
  for (auto& v : w.f32()) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    v = static_cast<float>(-bound + 2.0 * bound * u);
  }
  fc->weights[0] = std::move(w);
  const auto& attrs = std::get<FullyConnectedAttrs>(fc->kind);
  if (attrs.has_bias && fc->weights.size() > 1)
    fc->weights[1] = Tensor::zeros({num_classes}, DType::F32);
  g.meta.num_classes = num_classes;
  g.meta.class_names.clear();
  g.validate();
  return g;
}

}  // namespace eq
