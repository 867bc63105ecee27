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

#ifndef EDGEQUANT_SRC_KERNELS_HPP_
#define EDGEQUANT_SRC_KERNELS_HPP_

#include <cstdint>
#include <vector>

#include "edgequant/fixedpoint.hpp"
#include "edgequant/graph.hpp"
#include "edgequant/tensor.hpp"

// Internal compute kernels. All activations NHWC, weights HWIO / (in, out).
// Every kernel writes each output element from exactly one worker, so
// results are bit-identical for any thread count.

namespace eq::kernels {

// Spatial geometry shared by the forward kernels and backpropagation.
struct Geometry {
  int64_t oh = 0, ow = 0;
  int64_t pad_top = 0, pad_left = 0;
};

Geometry geometry(const std::vector<int64_t>& x_shape, int kh, int kw, int stride,
                  const Padding& pad, bool ceil_mode = false);

// c[m,n] += a[m,k] * b[k,n], c must be zeroed by the caller.
void matmul_f32(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
                int threads);

// c[m,n] = sum_kk a_i8[m,k] * b_i8[k,n] in i32.
void matmul_i8_i32(const int8_t* a, const int8_t* b, int32_t* c, int64_t m, int64_t k,
                   int64_t n, int threads);

Tensor conv2d_f32(const Tensor& x, const Tensor& w, const Tensor* bias, const Conv2dAttrs& a,
                  int threads);
Tensor depthwise_f32(const Tensor& x, const Tensor& w, const Tensor* bias,
                     const DepthwiseConv2dAttrs& a, int threads);
Tensor fully_connected_f32(const Tensor& x, const Tensor& w, const Tensor* bias, int threads);
Tensor batchnorm_f32(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     const Tensor& mean, const Tensor& var, float eps, int threads);
Tensor relu_f32(const Tensor& x, int threads);
Tensor relu6_f32(const Tensor& x, int threads);
Tensor silu_f32(const Tensor& x, int threads);
// argmax, when non-null, receives the flat input index chosen per output
// element (first maximum in scan order); -1 for empty windows.
Tensor maxpool_f32(const Tensor& x, const MaxPoolAttrs& a, int threads,
                   std::vector<int64_t>* argmax = nullptr);
Tensor avgpool_f32(const Tensor& x, const AvgPoolAttrs& a, int threads);
Tensor global_avgpool_f32(const Tensor& x, int threads);
Tensor add_f32(const Tensor& a, const Tensor& b, int threads);
Tensor concat_channels(const std::vector<const Tensor*>& xs, int threads);
Tensor softmax_f32(const Tensor& x, int threads);
Tensor squeeze_excite_f32(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                          const Tensor& b2, int threads);

float sigmoid(float v);

// ---------------------------------------------------------------------------
// Integer paths.
// ---------------------------------------------------------------------------

// Dynamic range: f32 input quantized on the fly (per-tensor asymmetric over
// the whole batch), int8 MACs, f32 result s_x * s_w[oc] * (acc - zx * sum_w).
Tensor conv2d_dynamic(const Tensor& x, const Tensor& w_q, const Tensor* bias,
                      const Conv2dAttrs& a, int threads);
Tensor depthwise_dynamic(const Tensor& x, const Tensor& w_q, const Tensor* bias,
                         const DepthwiseConv2dAttrs& a, int threads);
Tensor fully_connected_dynamic(const Tensor& x, const Tensor& w_q, const Tensor* bias,
                               int threads);

// Full integer: int8 in, int8 out, i32 accumulators requantized per output
// channel. Bias (optional) is i32 at scale s_in * s_w[oc].
Tensor conv2d_int8(const Tensor& x, const Tensor& w_q, const Tensor* bias_i32,
                   const Conv2dAttrs& a, const QuantParams& out_qp,
                   const std::vector<FixedPointMultiplier>& requant, int threads);
Tensor depthwise_int8(const Tensor& x, const Tensor& w_q, const Tensor* bias_i32,
                      const DepthwiseConv2dAttrs& a, const QuantParams& out_qp,
                      const std::vector<FixedPointMultiplier>& requant, int threads);
Tensor fully_connected_int8(const Tensor& x, const Tensor& w_q, const Tensor* bias_i32,
                            const QuantParams& out_qp,
                            const std::vector<FixedPointMultiplier>& requant, int threads);
// relu / relu6 clamp at the zero point; output keeps the input qparams.
Tensor relu_int8(const Tensor& x, int threads);
Tensor relu6_int8(const Tensor& x, int threads);
// 256-entry lookup table built from the input and output qparams.
Tensor silu_int8(const Tensor& x, const QuantParams& out_qp, int threads);
Tensor maxpool_int8(const Tensor& x, const MaxPoolAttrs& a, int threads);
// i32 window sums, divided with round-half-to-even; qparams pass through.
Tensor avgpool_int8(const Tensor& x, const AvgPoolAttrs& a, int threads);
Tensor global_avgpool_int8(const Tensor& x, int threads);
// Operands are requantized onto out_qp via one multiplier each.
Tensor add_int8(const Tensor& a, const Tensor& b, const QuantParams& out_qp,
                const std::vector<FixedPointMultiplier>& requant, int threads);
Tensor concat_int8(const std::vector<const Tensor*>& xs, const QuantParams& out_qp,
                   const std::vector<FixedPointMultiplier>& requant, int threads);
// Gate arithmetic runs in f32 between dequantize and requantize.
Tensor squeeze_excite_int8(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                           const Tensor& b2, const QuantParams& out_qp, int threads);

/// round_half_even(num / den) for positive den, exact in integers.
int64_t div_round_half_even(int64_t num, int64_t den);

}  // namespace eq::kernels

#endif  // EDGEQUANT_SRC_KERNELS_HPP_
