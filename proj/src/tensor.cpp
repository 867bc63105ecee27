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

#include "edgequant/tensor.hpp"

#include <algorithm>
#include <cstring>

#include "edgequant/float16.hpp"

namespace eq {

const char* dtype_name(DType t) {
  switch (t) {
    case DType::F32: return "f32";
    case DType::F16: return "f16";
    case DType::I8: return "i8";
    case DType::I32: return "i32";
    case DType::U8: return "u8";
  }
  return "?";
}

DType dtype_from_name(const std::string& name) {
  if (name == "f32") return DType::F32;
  if (name == "f16") return DType::F16;
  if (name == "i8") return DType::I8;
  if (name == "i32") return DType::I32;
  if (name == "u8") return DType::U8;
  throw ParseError("unknown dtype name: " + name);
}

int64_t shape_numel(std::span<const int64_t> shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

QuantParams QuantParams::per_tensor(float scale, int32_t zero_point, bool symmetric) {
  QuantParams qp;
  qp.granularity = Granularity::PerTensor;
  qp.scales = {scale};
  qp.zero_points = {zero_point};
  qp.symmetric = symmetric;
  qp.validate();
  return qp;
}

QuantParams QuantParams::per_channel(int axis, std::vector<float> scales,
                                     std::vector<int32_t> zero_points, bool symmetric) {
  QuantParams qp;
  qp.granularity = Granularity::PerChannel;
  qp.axis = axis;
  qp.scales = std::move(scales);
  qp.zero_points = std::move(zero_points);
  qp.symmetric = symmetric;
  qp.validate();
  return qp;
}

void QuantParams::validate() const {
  if (scales.empty() || scales.size() != zero_points.size())
    throw InvalidArgument("qparams: scales/zero_points must be non-empty and equal-length");
  if (granularity == Granularity::PerTensor && scales.size() != 1)
    throw InvalidArgument("qparams: per-tensor params must carry exactly one scale");
  if (granularity == Granularity::PerChannel && axis < 0)
    throw InvalidArgument("qparams: per-channel params need a channel axis");
  for (float s : scales)
    if (!(s > 0.0f) || !std::isfinite(s))
      throw InvalidArgument("qparams: scales must be finite and strictly positive");
  for (int32_t zp : zero_points) {
    if (zp < -128 || zp > 127)
      throw InvalidArgument("qparams: zero point out of [-128, 127]");
    if (symmetric && zp != 0)
      throw InvalidArgument("qparams: symmetric params require zero_point == 0");
  }
}

Tensor::Tensor(std::vector<int64_t> shape, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype) {
  for (int64_t d : shape_)
    if (d <= 0) throw InvalidArgument("tensor dims must be positive");
  data_.resize(static_cast<std::size_t>(numel()) * dtype_size(dtype_));
}

Tensor Tensor::zeros(std::vector<int64_t> shape, DType dtype) {
  return Tensor(std::move(shape), dtype);
}

Tensor Tensor::from_f32(std::vector<int64_t> shape, std::vector<float> values) {
  Tensor t(std::move(shape), DType::F32);
  if (static_cast<int64_t>(values.size()) != t.numel())
    throw InvalidArgument("from_f32: value count does not match shape");
  std::memcpy(t.data_.data(), values.data(), values.size() * sizeof(float));
  return t;
}

Tensor Tensor::scalar(float value) { return from_f32({1}, {value}); }

int64_t Tensor::numel() const { return shape_numel(shape_); }

const QuantParams& Tensor::qparams() const {
  if (!qparams_) throw InvalidArgument("tensor has no quantization parameters");
  return *qparams_;
}

void Tensor::set_qparams(QuantParams qp) {
  qp.validate();
  qparams_ = std::move(qp);
}

template <typename T>
static std::span<T> typed_span(std::vector<std::byte>& data, DType have, DType want) {
  if (have != want)
    throw InvalidArgument(std::string("tensor dtype is ") + dtype_name(have) +
                          ", expected " + dtype_name(want));
  return {reinterpret_cast<T*>(data.data()), data.size() / sizeof(T)};
}

template <typename T>
static std::span<const T> typed_span(const std::vector<std::byte>& data, DType have, DType want) {
  if (have != want)
    throw InvalidArgument(std::string("tensor dtype is ") + dtype_name(have) +
                          ", expected " + dtype_name(want));
  return {reinterpret_cast<const T*>(data.data()), data.size() / sizeof(T)};
}

std::span<float> Tensor::f32() { return typed_span<float>(data_, dtype_, DType::F32); }
std::span<const float> Tensor::f32() const { return typed_span<float>(data_, dtype_, DType::F32); }
std::span<uint16_t> Tensor::f16() { return typed_span<uint16_t>(data_, dtype_, DType::F16); }
std::span<const uint16_t> Tensor::f16() const { return typed_span<uint16_t>(data_, dtype_, DType::F16); }
std::span<int8_t> Tensor::i8() { return typed_span<int8_t>(data_, dtype_, DType::I8); }
std::span<const int8_t> Tensor::i8() const { return typed_span<int8_t>(data_, dtype_, DType::I8); }
std::span<int32_t> Tensor::i32() { return typed_span<int32_t>(data_, dtype_, DType::I32); }
std::span<const int32_t> Tensor::i32() const { return typed_span<int32_t>(data_, dtype_, DType::I32); }
std::span<uint8_t> Tensor::u8() { return typed_span<uint8_t>(data_, dtype_, DType::U8); }
std::span<const uint8_t> Tensor::u8() const { return typed_span<uint8_t>(data_, dtype_, DType::U8); }

bool Tensor::operator==(const Tensor& other) const {
  return shape_ == other.shape_ && dtype_ == other.dtype_ && qparams_ == other.qparams_ &&
         data_ == other.data_;
}

void Tensor::validate(const std::string& context) const {
  const std::string where = context.empty() ? "tensor" : context;
  if (data_.size() != static_cast<std::size_t>(numel()) * dtype_size(dtype_))
    throw InvalidArgument(where + ": buffer length does not match shape and dtype");
  if ((dtype_ == DType::I8) != qparams_.has_value())
    throw InvalidArgument(where + ": qparams must be present exactly for i8 tensors");
  if (qparams_) {
    qparams_->validate();
    if (qparams_->granularity == Granularity::PerChannel) {
      if (qparams_->axis >= static_cast<int>(shape_.size()))
        throw InvalidArgument(where + ": per-channel axis out of range");
      if (static_cast<int64_t>(qparams_->scales.size()) != shape_[qparams_->axis])
        throw InvalidArgument(where + ": per-channel scale count does not match axis size");
    }
  }
}

QuantParams choose_qparams_symmetric(float max_abs) {
  if (!std::isfinite(max_abs) || max_abs < 0.0f)
    throw InvalidArgument("choose_qparams_symmetric: max_abs must be finite and >= 0");
  const float scale = max_abs == 0.0f ? 1.0f : max_abs / 127.0f;
  return QuantParams::per_tensor(scale, 0, /*symmetric=*/true);
}

QuantParams choose_qparams_asymmetric(float min_v, float max_v) {
  if (!std::isfinite(min_v) || !std::isfinite(max_v))
    throw InvalidArgument("choose_qparams_asymmetric: range must be finite");
  if (min_v > max_v) throw InvalidArgument("choose_qparams_asymmetric: min > max");
  // Extend the range so zero is representable exactly.
  const double lo = std::min(0.0, static_cast<double>(min_v));
  const double hi = std::max(0.0, static_cast<double>(max_v));
  if (lo == 0.0 && hi == 0.0) return QuantParams::per_tensor(1.0f, 0);
  const double scale = (hi - lo) / 255.0;
  const double zp = round_half_even(-128.0 - lo / scale);
  const int32_t zp_i = static_cast<int32_t>(std::clamp(zp, -128.0, 127.0));
  return QuantParams::per_tensor(static_cast<float>(scale), zp_i);
}

static int8_t quantize_one(float x, float scale, int32_t zp) {
  const double q = round_half_even(static_cast<double>(x) / scale) + zp;
  return static_cast<int8_t>(std::clamp(q, -128.0, 127.0));
}

// Iterates the tensor as [outer, channels, inner] around the channel axis so
// per-channel parameters index the middle dimension.
static void channel_strides(const Tensor& t, int axis, int64_t* outer, int64_t* channels,
                            int64_t* inner) {
  *outer = 1;
  *inner = 1;
  for (int i = 0; i < axis; ++i) *outer *= t.shape()[i];
  *channels = t.shape()[axis];
  for (std::size_t i = axis + 1; i < t.shape().size(); ++i) *inner *= t.shape()[i];
}

Tensor quantize_affine(const Tensor& x, const QuantParams& qp) {
  qp.validate();
  if (x.dtype() != DType::F32) throw InvalidArgument("quantize_affine: input must be f32");
  Tensor out = Tensor::zeros(x.shape(), DType::I8);
  auto src = x.f32();
  // set_qparams after filling so validate() sees the final object
  std::span<int8_t> dst{reinterpret_cast<int8_t*>(out.raw().data()), src.size()};
  if (qp.granularity == Granularity::PerTensor) {
    const float s = qp.scale();
    const int32_t zp = qp.zero_point();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = quantize_one(src[i], s, zp);
  } else {
    if (qp.axis < 0 || qp.axis >= static_cast<int>(x.rank()))
      throw InvalidArgument("quantize_affine: per-channel axis out of range");
    if (static_cast<int64_t>(qp.scales.size()) != x.shape()[qp.axis])
      throw InvalidArgument("quantize_affine: scale count does not match channel axis size");
    int64_t outer, channels, inner;
    channel_strides(x, qp.axis, &outer, &channels, &inner);
    int64_t idx = 0;
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t c = 0; c < channels; ++c) {
        const float s = qp.scales[c];
        const int32_t zp = qp.zero_points[c];
        for (int64_t i = 0; i < inner; ++i, ++idx) dst[idx] = quantize_one(src[idx], s, zp);
      }
  }
  out.set_qparams(qp);
  return out;
}

Tensor dequantize(const Tensor& q, const QuantParams& qp) {
  qp.validate();
  if (q.dtype() != DType::I8) throw InvalidArgument("dequantize: input must be i8");
  Tensor out = Tensor::zeros(q.shape(), DType::F32);
  auto src = q.i8();
  auto dst = out.f32();
  if (qp.granularity == Granularity::PerTensor) {
    const float s = qp.scale();
    const int32_t zp = qp.zero_point();
    for (std::size_t i = 0; i < src.size(); ++i)
      dst[i] = static_cast<float>(src[i] - zp) * s;
  } else {
    if (static_cast<int64_t>(qp.scales.size()) != q.shape()[qp.axis])
      throw InvalidArgument("dequantize: scale count does not match channel axis size");
    int64_t outer, channels, inner;
    channel_strides(q, qp.axis, &outer, &channels, &inner);
    int64_t idx = 0;
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t c = 0; c < channels; ++c) {
        const float s = qp.scales[c];
        const int32_t zp = qp.zero_points[c];
        for (int64_t i = 0; i < inner; ++i, ++idx)
          dst[idx] = static_cast<float>(src[idx] - zp) * s;
      }
  }
  return out;
}

Tensor dequantize(const Tensor& q) { return dequantize(q, q.qparams()); }

Tensor tensor_to_f16(const Tensor& x) {
  if (x.dtype() != DType::F32) throw InvalidArgument("tensor_to_f16: input must be f32");
  Tensor out = Tensor::zeros(x.shape(), DType::F16);
  auto src = x.f32();
  auto dst = out.f16();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f32_to_f16(src[i]);
  return out;
}

Tensor tensor_to_f32(const Tensor& x) {
  if (x.dtype() == DType::F32) return x;
  if (x.dtype() != DType::F16) throw InvalidArgument("tensor_to_f32: input must be f16");
  Tensor out = Tensor::zeros(x.shape(), DType::F32);
  auto src = x.f16();
  auto dst = out.f32();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f16_to_f32(src[i]);
  return out;
}

}  // namespace eq
