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

#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "edgequant/threading.hpp"

namespace eq::kernels {
namespace {

int64_t out_dim(int64_t in, int k, int stride, const Padding& pad, bool ceil_mode) {
  int64_t before = 0, after = 0;
  compute_padding(in, k, stride, pad, &before, &after);
  const int64_t span = in + before + after - k;
  if (span < 0) throw InvalidArgument("kernel window larger than padded input");
  return ceil_mode ? (span + stride - 1) / stride + 1 : span / stride + 1;
}

template <typename T>
void im2col(const T* img, int64_t h, int64_t w, int64_t c, int kh, int kw, int stride,
            int64_t pad_top, int64_t pad_left, int64_t oh, int64_t ow, T pad_value, T* cols) {
  const int64_t row_len = static_cast<int64_t>(kh) * kw * c;
  for (int64_t oy = 0; oy < oh; ++oy) {
    for (int64_t ox = 0; ox < ow; ++ox) {
      T* row = cols + (oy * ow + ox) * row_len;
      for (int ky = 0; ky < kh; ++ky) {
        const int64_t iy = oy * stride - pad_top + ky;
        for (int kx = 0; kx < kw; ++kx) {
          const int64_t ix = ox * stride - pad_left + kx;
          T* dst = row + (static_cast<int64_t>(ky) * kw + kx) * c;
          if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
            std::fill(dst, dst + c, pad_value);
          } else {
            const T* src = img + (iy * w + ix) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
    }
  }
}

const Tensor* opt(const Tensor* t) { return t && t->numel() > 0 ? t : nullptr; }

float weight_scale(const QuantParams& qp, int64_t oc) {
  return qp.granularity == Granularity::PerChannel ? qp.scales[static_cast<std::size_t>(oc)]
                                                   : qp.scales[0];
}

// Per-output-channel sums of an int8 weight matrix laid out (k, cout).
std::vector<int32_t> column_sums(const int8_t* w, int64_t k, int64_t cout) {
  std::vector<int32_t> sums(static_cast<std::size_t>(cout), 0);
  for (int64_t kk = 0; kk < k; ++kk)
    for (int64_t oc = 0; oc < cout; ++oc) sums[static_cast<std::size_t>(oc)] += w[kk * cout + oc];
  return sums;
}

int8_t clamp_i8(int32_t v) {
  return static_cast<int8_t>(std::clamp(v, int32_t{-128}, int32_t{127}));
}

// Asymmetric per-tensor activation qparams over the whole tensor.
QuantParams activation_qparams(const Tensor& x) {
  const auto v = x.f32();
  float lo = 0.0f, hi = 0.0f;
  for (const float f : v) {
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  return choose_qparams_asymmetric(lo, hi);
}

}  // namespace

Geometry geometry(const std::vector<int64_t>& x, int kh, int kw, int stride, const Padding& pad,
                  bool ceil_mode) {
  Geometry g;
  int64_t after = 0;
  compute_padding(x[1], kh, stride, pad, &g.pad_top, &after);
  compute_padding(x[2], kw, stride, pad, &g.pad_left, &after);
  g.oh = out_dim(x[1], kh, stride, pad, ceil_mode);
  g.ow = out_dim(x[2], kw, stride, pad, ceil_mode);
  return g;
}

void matmul_f32(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
                int threads) {
  parallel_for(m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      float* crow = c + i * n;
      const float* arow = a + i * k;
      for (int64_t kk = 0; kk < k; ++kk) {
        const float av = arow[kk];
        const float* brow = b + kk * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

void matmul_i8_i32(const int8_t* a, const int8_t* b, int32_t* c, int64_t m, int64_t k,
                   int64_t n, int threads) {
  parallel_for(m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      int32_t* crow = c + i * n;
      const int8_t* arow = a + i * k;
      for (int64_t kk = 0; kk < k; ++kk) {
        const int32_t av = arow[kk];
        if (av == 0) continue;
        const int8_t* brow = b + kk * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// f32 kernels
// ---------------------------------------------------------------------------

Tensor conv2d_f32(const Tensor& x, const Tensor& w, const Tensor* bias, const Conv2dAttrs& a,
                  int threads) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], win = xs[2], cin = xs[3];
  const int64_t cout = w.dim(3);
  const int64_t cin_g = w.dim(2);
  if (cin_g * a.groups != cin) throw InvalidArgument("conv2d: channel/group mismatch");
  const Geometry g = geometry(xs, a.kh, a.kw, a.stride, a.pad);
  Tensor y = Tensor::zeros({n, g.oh, g.ow, cout}, DType::F32);
  const float* xp = x.f32().data();
  const float* wp = w.f32().data();
  float* yp = y.f32().data();
  const int64_t m = g.oh * g.ow;

  if (a.groups == 1) {
    const int64_t k = static_cast<int64_t>(a.kh) * a.kw * cin;
    std::vector<float> cols(static_cast<std::size_t>(m * k));
    for (int64_t img = 0; img < n; ++img) {
      im2col(xp + img * h * win * cin, h, win, cin, a.kh, a.kw, a.stride, g.pad_top, g.pad_left,
             g.oh, g.ow, 0.0f, cols.data());
      matmul_f32(cols.data(), wp, yp + img * m * cout, m, k, cout, threads);
    }
  } else {
    const int64_t cout_g = cout / a.groups;
    parallel_for(n * m, threads, [&](int64_t lo, int64_t hi) {
      for (int64_t r = lo; r < hi; ++r) {
        const int64_t img = r / m, oy = (r % m) / g.ow, ox = r % g.ow;
        float* row = yp + r * cout;
        for (int64_t oc = 0; oc < cout; ++oc) {
          const int64_t grp = oc / cout_g;
          float acc = 0.0f;
          for (int ky = 0; ky < a.kh; ++ky) {
            const int64_t iy = oy * a.stride - g.pad_top + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < a.kw; ++kx) {
              const int64_t ix = ox * a.stride - g.pad_left + kx;
              if (ix < 0 || ix >= win) continue;
              const float* src = xp + ((img * h + iy) * win + ix) * cin + grp * cin_g;
              const float* wk = wp + (static_cast<int64_t>(ky) * a.kw + kx) * cin_g * cout + oc;
              for (int64_t ic = 0; ic < cin_g; ++ic) acc += src[ic] * wk[ic * cout];
            }
          }
          row[oc] = acc;
        }
      }
    });
  }

  if (const Tensor* b = opt(bias)) {
    const float* bp = b->f32().data();
    parallel_for(n * m, threads, [&](int64_t lo, int64_t hi) {
      for (int64_t r = lo; r < hi; ++r)
        for (int64_t oc = 0; oc < cout; ++oc) yp[r * cout + oc] += bp[oc];
    });
  }
  return y;
}

Tensor depthwise_f32(const Tensor& x, const Tensor& w, const Tensor* bias,
                     const DepthwiseConv2dAttrs& a, int threads) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], win = xs[2], c = xs[3];
  if (w.dim(3) != c) throw InvalidArgument("depthwise: channel mismatch");
  const Geometry g = geometry(xs, a.kh, a.kw, a.stride, a.pad);
  Tensor y = Tensor::zeros({n, g.oh, g.ow, c}, DType::F32);
  const float* xp = x.f32().data();
  const float* wp = w.f32().data();
  const float* bp = opt(bias) ? bias->f32().data() : nullptr;
  float* yp = y.f32().data();
  const int64_t m = g.oh * g.ow;
  parallel_for(n * m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / m, oy = (r % m) / g.ow, ox = r % g.ow;
      float* row = yp + r * c;
      for (int64_t ch = 0; ch < c; ++ch) {
        float acc = bp ? bp[ch] : 0.0f;
        for (int ky = 0; ky < a.kh; ++ky) {
          const int64_t iy = oy * a.stride - g.pad_top + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < a.kw; ++kx) {
            const int64_t ix = ox * a.stride - g.pad_left + kx;
            if (ix < 0 || ix >= win) continue;
            acc += xp[((img * h + iy) * win + ix) * c + ch] *
                   wp[(static_cast<int64_t>(ky) * a.kw + kx) * c + ch];
          }
        }
        row[ch] = acc;
      }
    }
  });
  return y;
}

Tensor fully_connected_f32(const Tensor& x, const Tensor& w, const Tensor* bias, int threads) {
  const int64_t n = x.dim(0);
  const int64_t flat = x.numel() / n;
  if (flat != w.dim(0)) throw InvalidArgument("fully_connected: input size mismatch");
  const int64_t out = w.dim(1);
  Tensor y = Tensor::zeros({n, out}, DType::F32);
  matmul_f32(x.f32().data(), w.f32().data(), y.f32().data(), n, flat, out, threads);
  if (const Tensor* b = opt(bias)) {
    float* yp = y.f32().data();
    const float* bp = b->f32().data();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < out; ++j) yp[i * out + j] += bp[j];
  }
  return y;
}

Tensor batchnorm_f32(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     const Tensor& mean, const Tensor& var, float eps, int threads) {
  const int64_t c = x.shape().back();
  if (gamma.numel() != c) throw InvalidArgument("batchnorm: channel mismatch");
  std::vector<float> a(static_cast<std::size_t>(c)), b(static_cast<std::size_t>(c));
  const auto gp = gamma.f32(), bp = beta.f32(), mp = mean.f32(), vp = var.f32();
  for (int64_t i = 0; i < c; ++i) {
    a[i] = gp[i] / std::sqrt(vp[i] + eps);
    b[i] = bp[i] - mp[i] * a[i];
  }
  Tensor y = Tensor::zeros(x.shape(), DType::F32);
  const float* xp = x.f32().data();
  float* yp = y.f32().data();
  const int64_t rows = x.numel() / c;
  parallel_for(rows, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r)
      for (int64_t ch = 0; ch < c; ++ch) yp[r * c + ch] = xp[r * c + ch] * a[ch] + b[ch];
  });
  return y;
}

namespace {

template <typename F>
Tensor elementwise(const Tensor& x, int threads, F f) {
  Tensor y = Tensor::zeros(x.shape(), DType::F32);
  const float* xp = x.f32().data();
  float* yp = y.f32().data();
  parallel_for(x.numel(), threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) yp[i] = f(xp[i]);
  });
  return y;
}

}  // namespace

float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }

Tensor relu_f32(const Tensor& x, int threads) {
  return elementwise(x, threads, [](float v) { return v > 0.0f ? v : 0.0f; });
}

Tensor relu6_f32(const Tensor& x, int threads) {
  return elementwise(x, threads, [](float v) { return std::clamp(v, 0.0f, 6.0f); });
}

Tensor silu_f32(const Tensor& x, int threads) {
  return elementwise(x, threads, [](float v) { return v * sigmoid(v); });
}

Tensor maxpool_f32(const Tensor& x, const MaxPoolAttrs& a, int threads,
                   std::vector<int64_t>* argmax) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
  const Geometry g = geometry(xs, a.k, a.k, a.stride, a.pad, a.ceil_mode);
  Tensor y = Tensor::zeros({n, g.oh, g.ow, c}, DType::F32);
  if (argmax) argmax->assign(static_cast<std::size_t>(y.numel()), -1);
  const float* xp = x.f32().data();
  float* yp = y.f32().data();
  const int64_t m = g.oh * g.ow;
  parallel_for(n * m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / m, oy = (r % m) / g.ow, ox = r % g.ow;
      for (int64_t ch = 0; ch < c; ++ch) {
        float best = -std::numeric_limits<float>::infinity();
        int64_t best_idx = -1;
        for (int ky = 0; ky < a.k; ++ky) {
          const int64_t iy = oy * a.stride - g.pad_top + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < a.k; ++kx) {
            const int64_t ix = ox * a.stride - g.pad_left + kx;
            if (ix < 0 || ix >= w) continue;
            const int64_t idx = ((img * h + iy) * w + ix) * c + ch;
            if (xp[idx] > best) {
              best = xp[idx];
              best_idx = idx;
            }
          }
        }
        yp[r * c + ch] = best;
        if (argmax) (*argmax)[static_cast<std::size_t>(r * c + ch)] = best_idx;
      }
    }
  });
  return y;
}

Tensor avgpool_f32(const Tensor& x, const AvgPoolAttrs& a, int threads) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
  const Geometry g = geometry(xs, a.k, a.k, a.stride, a.pad, a.ceil_mode);
  Tensor y = Tensor::zeros({n, g.oh, g.ow, c}, DType::F32);
  const float* xp = x.f32().data();
  float* yp = y.f32().data();
  const int64_t m = g.oh * g.ow;
  parallel_for(n * m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / m, oy = (r % m) / g.ow, ox = r % g.ow;
      for (int64_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        int64_t count = 0;
        for (int ky = 0; ky < a.k; ++ky) {
          const int64_t iy = oy * a.stride - g.pad_top + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < a.k; ++kx) {
            const int64_t ix = ox * a.stride - g.pad_left + kx;
            if (ix < 0 || ix >= w) continue;
            sum += xp[((img * h + iy) * w + ix) * c + ch];
            ++count;
          }
        }
        yp[r * c + ch] = count > 0 ? static_cast<float>(sum / count) : 0.0f;
      }
    }
  });
  return y;
}

Tensor global_avgpool_f32(const Tensor& x, int threads) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], hw = xs[1] * xs[2], c = xs[3];
  Tensor y = Tensor::zeros({n, 1, 1, c}, DType::F32);
  const float* xp = x.f32().data();
  float* yp = y.f32().data();
  parallel_for(n * c, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / c, ch = r % c;
      double sum = 0.0;
      for (int64_t i = 0; i < hw; ++i) sum += xp[(img * hw + i) * c + ch];
      yp[r] = static_cast<float>(sum / static_cast<double>(hw));
    }
  });
  return y;
}

Tensor add_f32(const Tensor& a, const Tensor& b, int threads) {
  if (a.shape() != b.shape()) throw InvalidArgument("add: shape mismatch");
  Tensor y = Tensor::zeros(a.shape(), DType::F32);
  const float* ap = a.f32().data();
  const float* bp = b.f32().data();
  float* yp = y.f32().data();
  parallel_for(a.numel(), threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) yp[i] = ap[i] + bp[i];
  });
  return y;
}

namespace {

template <typename T>
Tensor concat_impl(const std::vector<const Tensor*>& xs, DType dtype, int threads) {
  const auto& s0 = xs[0]->shape();
  int64_t ctotal = 0;
  for (const Tensor* t : xs) {
    const auto& s = t->shape();
    if (s.size() != s0.size()) throw InvalidArgument("concat: rank mismatch");
    for (std::size_t d = 0; d + 1 < s.size(); ++d)
      if (s[d] != s0[d]) throw InvalidArgument("concat: non-channel dims differ");
    ctotal += s.back();
  }
  std::vector<int64_t> out_shape = s0;
  out_shape.back() = ctotal;
  Tensor y = Tensor::zeros(out_shape, dtype);
  T* yp = reinterpret_cast<T*>(y.raw().data());
  const int64_t rows = y.numel() / ctotal;
  parallel_for(rows, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      int64_t off = 0;
      for (const Tensor* t : xs) {
        const int64_t c = t->shape().back();
        const T* src = reinterpret_cast<const T*>(t->raw().data()) + r * c;
        std::copy(src, src + c, yp + r * ctotal + off);
        off += c;
      }
    }
  });
  return y;
}

}  // namespace

Tensor concat_channels(const std::vector<const Tensor*>& xs, int threads) {
  if (xs.empty()) throw InvalidArgument("concat: no inputs");
  return concat_impl<float>(xs, DType::F32, threads);
}

Tensor softmax_f32(const Tensor& x, int threads) {
  const int64_t n = x.dim(0);
  const int64_t k = x.numel() / n;
  Tensor y = Tensor::zeros(x.shape(), DType::F32);
  const float* xp = x.f32().data();
  float* yp = y.f32().data();
  parallel_for(n, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const float* row = xp + i * k;
      float mx = row[0];
      for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
      double sum = 0.0;
      for (int64_t j = 0; j < k; ++j) {
        const double e = std::exp(static_cast<double>(row[j]) - mx);
        yp[i * k + j] = static_cast<float>(e);
        sum += e;
      }
      for (int64_t j = 0; j < k; ++j)
        yp[i * k + j] = static_cast<float>(yp[i * k + j] / sum);
    }
  });
  return y;
}

Tensor squeeze_excite_f32(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                          const Tensor& b2, int threads) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], hw = xs[1] * xs[2], c = xs[3];
  const int64_t sq = w1.dim(3);
  if (w1.dim(2) != c || w2.dim(2) != sq || w2.dim(3) != c)
    throw InvalidArgument("squeeze_excite: weight shape mismatch");
  Tensor y = Tensor::zeros(xs, DType::F32);
  const float* xp = x.f32().data();
  const float* w1p = w1.f32().data();
  const float* b1p = b1.f32().data();
  const float* w2p = w2.f32().data();
  const float* b2p = b2.f32().data();
  float* yp = y.f32().data();
  std::vector<float> gates(static_cast<std::size_t>(n * c));
  for (int64_t img = 0; img < n; ++img) {
    std::vector<double> s(static_cast<std::size_t>(c), 0.0);
    for (int64_t i = 0; i < hw; ++i)
      for (int64_t ch = 0; ch < c; ++ch) s[ch] += xp[(img * hw + i) * c + ch];
    std::vector<float> z1(static_cast<std::size_t>(sq));
    for (int64_t j = 0; j < sq; ++j) {
      double acc = b1p[j];
      for (int64_t ch = 0; ch < c; ++ch)
        acc += (s[ch] / static_cast<double>(hw)) * w1p[ch * sq + j];
      const float v = static_cast<float>(acc);
      z1[j] = v * sigmoid(v);
    }
    for (int64_t ch = 0; ch < c; ++ch) {
      double acc = b2p[ch];
      for (int64_t j = 0; j < sq; ++j) acc += z1[j] * w2p[j * c + ch];
      gates[img * c + ch] = sigmoid(static_cast<float>(acc));
    }
  }
  parallel_for(n * hw, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / hw;
      for (int64_t ch = 0; ch < c; ++ch)
        yp[r * c + ch] = xp[r * c + ch] * gates[img * c + ch];
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Dynamic-range kernels
// ---------------------------------------------------------------------------

Tensor conv2d_dynamic(const Tensor& x, const Tensor& w_q, const Tensor* bias,
                      const Conv2dAttrs& a, int threads) {
  if (a.groups != 1) throw UnsupportedPattern("dynamic conv requires groups == 1");
  const QuantParams xqp = activation_qparams(x);
  const Tensor xq = quantize_affine(x, xqp);
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], win = xs[2], cin = xs[3];
  const int64_t cout = w_q.dim(3);
  const Geometry g = geometry(xs, a.kh, a.kw, a.stride, a.pad);
  const int64_t m = g.oh * g.ow;
  const int64_t k = static_cast<int64_t>(a.kh) * a.kw * cin;

  const int8_t* wp = w_q.i8().data();
  const std::vector<int32_t> wsum = column_sums(wp, k, cout);
  const QuantParams& wqp = w_q.qparams();
  const float sx = xqp.scale();
  const int32_t zx = xqp.zero_point();
  const float* bp = opt(bias) ? bias->f32().data() : nullptr;

  Tensor y = Tensor::zeros({n, g.oh, g.ow, cout}, DType::F32);
  float* yp = y.f32().data();
  std::vector<int8_t> cols(static_cast<std::size_t>(m * k));
  std::vector<int32_t> acc(static_cast<std::size_t>(m * cout));
  for (int64_t img = 0; img < n; ++img) {
    im2col(xq.i8().data() + img * h * win * cin, h, win, cin, a.kh, a.kw, a.stride, g.pad_top,
           g.pad_left, g.oh, g.ow, static_cast<int8_t>(zx), cols.data());
    std::fill(acc.begin(), acc.end(), 0);
    matmul_i8_i32(cols.data(), wp, acc.data(), m, k, cout, threads);
    float* yimg = yp + img * m * cout;
    parallel_for(m, threads, [&](int64_t lo, int64_t hi) {
      for (int64_t r = lo; r < hi; ++r)
        for (int64_t oc = 0; oc < cout; ++oc) {
          const float dequant = sx * weight_scale(wqp, oc) *
                                static_cast<float>(acc[r * cout + oc] - zx * wsum[oc]);
          yimg[r * cout + oc] = dequant + (bp ? bp[oc] : 0.0f);
        }
    });
  }
  return y;
}

Tensor depthwise_dynamic(const Tensor& x, const Tensor& w_q, const Tensor* bias,
                         const DepthwiseConv2dAttrs& a, int threads) {
  const QuantParams xqp = activation_qparams(x);
  const Tensor xq = quantize_affine(x, xqp);
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], win = xs[2], c = xs[3];
  const Geometry g = geometry(xs, a.kh, a.kw, a.stride, a.pad);
  const int64_t m = g.oh * g.ow;
  const int8_t* wp = w_q.i8().data();
  const QuantParams& wqp = w_q.qparams();
  const float sx = xqp.scale();
  const int32_t zx = xqp.zero_point();
  const float* bp = opt(bias) ? bias->f32().data() : nullptr;
  const int8_t* xp = xq.i8().data();

  Tensor y = Tensor::zeros({n, g.oh, g.ow, c}, DType::F32);
  float* yp = y.f32().data();
  parallel_for(n * m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / m, oy = (r % m) / g.ow, ox = r % g.ow;
      for (int64_t ch = 0; ch < c; ++ch) {
        int32_t acc = 0;
        int32_t wsum = 0;
        for (int ky = 0; ky < a.kh; ++ky) {
          const int64_t iy = oy * a.stride - g.pad_top + ky;
          for (int kx = 0; kx < a.kw; ++kx) {
            const int64_t ix = ox * a.stride - g.pad_left + kx;
            const int32_t wv = wp[(static_cast<int64_t>(ky) * a.kw + kx) * c + ch];
            wsum += wv;
            const int32_t xv = (iy < 0 || iy >= h || ix < 0 || ix >= win)
                                   ? zx
                                   : xp[((img * h + iy) * win + ix) * c + ch];
            acc += xv * wv;
          }
        }
        yp[r * c + ch] = sx * weight_scale(wqp, ch) * static_cast<float>(acc - zx * wsum) +
                         (bp ? bp[ch] : 0.0f);
      }
    }
  });
  return y;
}

Tensor fully_connected_dynamic(const Tensor& x, const Tensor& w_q, const Tensor* bias,
                               int threads) {
  const int64_t n = x.dim(0);
  const int64_t flat = x.numel() / n;
  if (flat != w_q.dim(0)) throw InvalidArgument("fully_connected: input size mismatch");
  const int64_t out = w_q.dim(1);
  const QuantParams xqp = activation_qparams(x);
  const Tensor xq = quantize_affine(x, xqp);
  const int8_t* wp = w_q.i8().data();
  const std::vector<int32_t> wsum = column_sums(wp, flat, out);
  const QuantParams& wqp = w_q.qparams();
  const float sx = xqp.scale();
  const int32_t zx = xqp.zero_point();
  const float* bp = opt(bias) ? bias->f32().data() : nullptr;

  std::vector<int32_t> acc(static_cast<std::size_t>(n * out), 0);
  matmul_i8_i32(xq.i8().data(), wp, acc.data(), n, flat, out, threads);
  Tensor y = Tensor::zeros({n, out}, DType::F32);
  float* yp = y.f32().data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < out; ++j)
      yp[i * out + j] = sx * weight_scale(wqp, j) *
                            static_cast<float>(acc[i * out + j] - zx * wsum[j]) +
                        (bp ? bp[j] : 0.0f);
  return y;
}

// ---------------------------------------------------------------------------
// Full-integer kernels
// ---------------------------------------------------------------------------

Tensor conv2d_int8(const Tensor& x, const Tensor& w_q, const Tensor* bias_i32,
                   const Conv2dAttrs& a, const QuantParams& out_qp,
                   const std::vector<FixedPointMultiplier>& requant, int threads) {
  if (a.groups != 1) throw UnsupportedPattern("full-int conv requires groups == 1");
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], win = xs[2], cin = xs[3];
  const int64_t cout = w_q.dim(3);
  if (static_cast<int64_t>(requant.size()) != cout)
    throw InvalidArgument("conv2d_int8: requant size mismatch");
  const Geometry g = geometry(xs, a.kh, a.kw, a.stride, a.pad);
  const int64_t m = g.oh * g.ow;
  const int64_t k = static_cast<int64_t>(a.kh) * a.kw * cin;
  const int8_t* wp = w_q.i8().data();
  const std::vector<int32_t> wsum = column_sums(wp, k, cout);
  const int32_t zx = x.qparams().zero_point();
  const int32_t zy = out_qp.zero_point();
  const int32_t* bp = opt(bias_i32) ? bias_i32->i32().data() : nullptr;

  Tensor y = Tensor::zeros({n, g.oh, g.ow, cout}, DType::I8);
  y.set_qparams(out_qp);
  int8_t* yp = y.i8().data();
  std::vector<int8_t> cols(static_cast<std::size_t>(m * k));
  std::vector<int32_t> acc(static_cast<std::size_t>(m * cout));
  for (int64_t img = 0; img < n; ++img) {
    im2col(x.i8().data() + img * h * win * cin, h, win, cin, a.kh, a.kw, a.stride, g.pad_top,
           g.pad_left, g.oh, g.ow, static_cast<int8_t>(zx), cols.data());
    std::fill(acc.begin(), acc.end(), 0);
    matmul_i8_i32(cols.data(), wp, acc.data(), m, k, cout, threads);
    int8_t* yimg = yp + img * m * cout;
    parallel_for(m, threads, [&](int64_t lo, int64_t hi) {
      for (int64_t r = lo; r < hi; ++r)
        for (int64_t oc = 0; oc < cout; ++oc) {
          int32_t v = acc[r * cout + oc] - zx * wsum[oc];
          if (bp) v += bp[oc];
          yimg[r * cout + oc] = clamp_i8(zy + saturating_rounding_multiply(v, requant[oc]));
        }
    });
  }
  return y;
}

Tensor depthwise_int8(const Tensor& x, const Tensor& w_q, const Tensor* bias_i32,
                      const DepthwiseConv2dAttrs& a, const QuantParams& out_qp,
                      const std::vector<FixedPointMultiplier>& requant, int threads) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], win = xs[2], c = xs[3];
  if (static_cast<int64_t>(requant.size()) != c)
    throw InvalidArgument("depthwise_int8: requant size mismatch");
  const Geometry g = geometry(xs, a.kh, a.kw, a.stride, a.pad);
  const int64_t m = g.oh * g.ow;
  const int8_t* wp = w_q.i8().data();
  const int8_t* xp = x.i8().data();
  const int32_t zx = x.qparams().zero_point();
  const int32_t zy = out_qp.zero_point();
  const int32_t* bp = opt(bias_i32) ? bias_i32->i32().data() : nullptr;

  Tensor y = Tensor::zeros({n, g.oh, g.ow, c}, DType::I8);
  y.set_qparams(out_qp);
  int8_t* yp = y.i8().data();
  parallel_for(n * m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / m, oy = (r % m) / g.ow, ox = r % g.ow;
      for (int64_t ch = 0; ch < c; ++ch) {
        int32_t acc = 0;
        int32_t wsum = 0;
        for (int ky = 0; ky < a.kh; ++ky) {
          const int64_t iy = oy * a.stride - g.pad_top + ky;
          for (int kx = 0; kx < a.kw; ++kx) {
            const int64_t ix = ox * a.stride - g.pad_left + kx;
            const int32_t wv = wp[(static_cast<int64_t>(ky) * a.kw + kx) * c + ch];
            wsum += wv;
            const int32_t xv = (iy < 0 || iy >= h || ix < 0 || ix >= win)
                                   ? zx
                                   : xp[((img * h + iy) * win + ix) * c + ch];
            acc += xv * wv;
          }
        }
        acc -= zx * wsum;
        if (bp) acc += bp[ch];
        yp[r * c + ch] = clamp_i8(zy + saturating_rounding_multiply(acc, requant[ch]));
      }
    }
  });
  return y;
}

Tensor fully_connected_int8(const Tensor& x, const Tensor& w_q, const Tensor* bias_i32,
                            const QuantParams& out_qp,
                            const std::vector<FixedPointMultiplier>& requant, int threads) {
  const int64_t n = x.dim(0);
  const int64_t flat = x.numel() / n;
  if (flat != w_q.dim(0)) throw InvalidArgument("fully_connected: input size mismatch");
  const int64_t out = w_q.dim(1);
  if (static_cast<int64_t>(requant.size()) != out)
    throw InvalidArgument("fully_connected_int8: requant size mismatch");
  const int8_t* wp = w_q.i8().data();
  const std::vector<int32_t> wsum = column_sums(wp, flat, out);
  const int32_t zx = x.qparams().zero_point();
  const int32_t zy = out_qp.zero_point();
  const int32_t* bp = opt(bias_i32) ? bias_i32->i32().data() : nullptr;

  std::vector<int32_t> acc(static_cast<std::size_t>(n * out), 0);
  matmul_i8_i32(x.i8().data(), wp, acc.data(), n, flat, out, threads);
  Tensor y = Tensor::zeros({n, out}, DType::I8);
  y.set_qparams(out_qp);
  int8_t* yp = y.i8().data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < out; ++j) {
      int32_t v = acc[i * out + j] - zx * wsum[j];
      if (bp) v += bp[j];
      yp[i * out + j] = clamp_i8(zy + saturating_rounding_multiply(v, requant[j]));
    }
  return y;
}

Tensor relu_int8(const Tensor& x, int threads) {
  const int32_t zp = x.qparams().zero_point();
  Tensor y = Tensor::zeros(x.shape(), DType::I8);
  y.set_qparams(x.qparams());
  const int8_t* xp = x.i8().data();
  int8_t* yp = y.i8().data();
  parallel_for(x.numel(), threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i)
      yp[i] = static_cast<int8_t>(std::max<int32_t>(xp[i], zp));
  });
  return y;
}

Tensor relu6_int8(const Tensor& x, int threads) {
  const QuantParams& qp = x.qparams();
  const int32_t zp = qp.zero_point();
  const int32_t hi6 = static_cast<int32_t>(std::min<double>(
      127.0, zp + round_half_even(6.0 / static_cast<double>(qp.scale()))));
  Tensor y = Tensor::zeros(x.shape(), DType::I8);
  y.set_qparams(qp);
  const int8_t* xp = x.i8().data();
  int8_t* yp = y.i8().data();
  parallel_for(x.numel(), threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i)
      yp[i] = static_cast<int8_t>(std::clamp<int32_t>(xp[i], zp, hi6));
  });
  return y;
}

Tensor silu_int8(const Tensor& x, const QuantParams& out_qp, int threads) {
  const QuantParams& in_qp = x.qparams();
  const double sx = in_qp.scale(), zx = in_qp.zero_point();
  const double sy = out_qp.scale(), zy = out_qp.zero_point();
  int8_t lut[256];
  for (int q = -128; q <= 127; ++q) {
    const double xr = (q - zx) * sx;
    const double yr = xr / (1.0 + std::exp(-xr));
    lut[q + 128] = clamp_i8(static_cast<int32_t>(round_half_even(yr / sy) + zy));
  }
  Tensor y = Tensor::zeros(x.shape(), DType::I8);
  y.set_qparams(out_qp);
  const int8_t* xp = x.i8().data();
  int8_t* yp = y.i8().data();
  parallel_for(x.numel(), threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) yp[i] = lut[xp[i] + 128];
  });
  return y;
}

Tensor maxpool_int8(const Tensor& x, const MaxPoolAttrs& a, int threads) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
  const Geometry g = geometry(xs, a.k, a.k, a.stride, a.pad, a.ceil_mode);
  Tensor y = Tensor::zeros({n, g.oh, g.ow, c}, DType::I8);
  y.set_qparams(x.qparams());
  const int8_t* xp = x.i8().data();
  int8_t* yp = y.i8().data();
  const int64_t m = g.oh * g.ow;
  parallel_for(n * m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / m, oy = (r % m) / g.ow, ox = r % g.ow;
      for (int64_t ch = 0; ch < c; ++ch) {
        int32_t best = -128;
        for (int ky = 0; ky < a.k; ++ky) {
          const int64_t iy = oy * a.stride - g.pad_top + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < a.k; ++kx) {
            const int64_t ix = ox * a.stride - g.pad_left + kx;
            if (ix < 0 || ix >= w) continue;
            best = std::max<int32_t>(best, xp[((img * h + iy) * w + ix) * c + ch]);
          }
        }
        yp[r * c + ch] = static_cast<int8_t>(best);
      }
    }
  });
  return y;
}

int64_t div_round_half_even(int64_t num, int64_t den) {
  int64_t q = num / den;
  int64_t r = num % den;
  if (r < 0) {
    q -= 1;
    r += den;
  }
  const int64_t twice = 2 * r;
  if (twice > den) return q + 1;
  if (twice < den) return q;
  return q % 2 == 0 ? q : q + 1;
}

Tensor avgpool_int8(const Tensor& x, const AvgPoolAttrs& a, int threads) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
  const Geometry g = geometry(xs, a.k, a.k, a.stride, a.pad, a.ceil_mode);
  Tensor y = Tensor::zeros({n, g.oh, g.ow, c}, DType::I8);
  y.set_qparams(x.qparams());
  const int8_t* xp = x.i8().data();
  int8_t* yp = y.i8().data();
  const int64_t m = g.oh * g.ow;
  parallel_for(n * m, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / m, oy = (r % m) / g.ow, ox = r % g.ow;
      for (int64_t ch = 0; ch < c; ++ch) {
        int64_t sum = 0;
        int64_t count = 0;
        for (int ky = 0; ky < a.k; ++ky) {
          const int64_t iy = oy * a.stride - g.pad_top + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < a.k; ++kx) {
            const int64_t ix = ox * a.stride - g.pad_left + kx;
            if (ix < 0 || ix >= w) continue;
            sum += xp[((img * h + iy) * w + ix) * c + ch];
            ++count;
          }
        }
        yp[r * c + ch] =
            count > 0 ? clamp_i8(static_cast<int32_t>(div_round_half_even(sum, count))) : 0;
      }
    }
  });
  return y;
}

Tensor global_avgpool_int8(const Tensor& x, int threads) {
  const auto& xs = x.shape();
  const int64_t n = xs[0], hw = xs[1] * xs[2], c = xs[3];
  Tensor y = Tensor::zeros({n, 1, 1, c}, DType::I8);
  y.set_qparams(x.qparams());
  const int8_t* xp = x.i8().data();
  int8_t* yp = y.i8().data();
  parallel_for(n * c, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const int64_t img = r / c, ch = r % c;
      int64_t sum = 0;
      for (int64_t i = 0; i < hw; ++i) sum += xp[(img * hw + i) * c + ch];
      yp[r] = clamp_i8(static_cast<int32_t>(div_round_half_even(sum, hw)));
    }
  });
  return y;
}

Tensor add_int8(const Tensor& a, const Tensor& b, const QuantParams& out_qp,
                const std::vector<FixedPointMultiplier>& requant, int threads) {
  if (a.shape() != b.shape()) throw InvalidArgument("add: shape mismatch");
  if (requant.size() != 2) throw InvalidArgument("add_int8: needs one multiplier per operand");
  const int32_t za = a.qparams().zero_point();
  const int32_t zb = b.qparams().zero_point();
  const int32_t zy = out_qp.zero_point();
  Tensor y = Tensor::zeros(a.shape(), DType::I8);
  y.set_qparams(out_qp);
  const int8_t* ap = a.i8().data();
  const int8_t* bp = b.i8().data();
  int8_t* yp = y.i8().data();
  parallel_for(a.numel(), threads, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const int32_t va = saturating_rounding_multiply(ap[i] - za, requant[0]);
      const int32_t vb = saturating_rounding_multiply(bp[i] - zb, requant[1]);
      yp[i] = clamp_i8(zy + va + vb);
    }
  });
  return y;
}

Tensor concat_int8(const std::vector<const Tensor*>& xs, const QuantParams& out_qp,
                   const std::vector<FixedPointMultiplier>& requant, int threads) {
  if (xs.empty()) throw InvalidArgument("concat: no inputs");
  if (requant.size() != xs.size())
    throw InvalidArgument("concat_int8: needs one multiplier per operand");
  Tensor y = concat_impl<int8_t>(xs, DType::I8, threads);
  y.set_qparams(out_qp);
  // Requantize in place, slice by slice.
  const int64_t ctotal = y.shape().back();
  const int64_t rows = y.numel() / ctotal;
  const int32_t zy = out_qp.zero_point();
  int8_t* yp = y.i8().data();
  parallel_for(rows, threads, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      int64_t off = 0;
      for (std::size_t t = 0; t < xs.size(); ++t) {
        const int64_t c = xs[t]->shape().back();
        const int32_t z = xs[t]->qparams().zero_point();
        for (int64_t ch = 0; ch < c; ++ch) {
          int8_t& v = yp[r * ctotal + off + ch];
          v = clamp_i8(zy + saturating_rounding_multiply(v - z, requant[t]));
        }
        off += c;
      }
    }
  });
  return y;
}

Tensor squeeze_excite_int8(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                           const Tensor& b2, const QuantParams& out_qp, int threads) {
  const Tensor xf = dequantize(x);
  const Tensor yf = squeeze_excite_f32(xf, w1, b1, w2, b2, threads);
  return quantize_affine(yf, out_qp);
}

}  // namespace eq::kernels
