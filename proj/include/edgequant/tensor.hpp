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

#ifndef EDGEQUANT_TENSOR_HPP_
#define EDGEQUANT_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgequant/errors.hpp"

namespace eq {

enum class DType : uint8_t { F32, F16, I8, I32, U8 };

constexpr std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::F16: return 2;
    case DType::I8: return 1;
    case DType::I32: return 4;
    case DType::U8: return 1;
  }
  return 0;
}

const char* dtype_name(DType t);
DType dtype_from_name(const std::string& name);

/// Round half to even, independent of the floating-point environment.
inline double round_half_even(double v) {
  const double f = std::floor(v);
  const double diff = v - f;
  if (diff > 0.5) return f + 1.0;
  if (diff < 0.5) return f;
  return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;
}

enum class Granularity : uint8_t { PerTensor, PerChannel };

/// Affine quantization parameters: real = (q - zero_point) * scale.
/// Per-channel params carry one (scale, zero_point) pair per slice of the
/// channel axis; per-tensor params carry exactly one.
struct QuantParams {
  Granularity granularity = Granularity::PerTensor;
  int axis = -1;  // channel axis, meaningful only for PerChannel
  std::vector<float> scales;
  std::vector<int32_t> zero_points;
  bool symmetric = false;

  static QuantParams per_tensor(float scale, int32_t zero_point, bool symmetric = false);
  static QuantParams per_channel(int axis, std::vector<float> scales,
                                 std::vector<int32_t> zero_points, bool symmetric = false);

  /// Throws InvalidArgument if any invariant is violated: positive finite
  /// scales, zero points in [-128, 127], matching list lengths, and all-zero
  /// zero points when symmetric.
  void validate() const;

  float scale() const { return scales.at(0); }
  int32_t zero_point() const { return zero_points.at(0); }

  bool operator==(const QuantParams&) const = default;
};

/// Dense n-dimensional array, contiguous row-major. Quantization parameters
/// are attached exactly when dtype is I8.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape, DType dtype);
  static Tensor from_f32(std::vector<int64_t> shape, std::vector<float> values);
  static Tensor scalar(float value);

  const std::vector<int64_t>& shape() const { return shape_; }
  DType dtype() const { return dtype_; }
  int64_t numel() const;
  std::size_t byte_size() const { return data_.size(); }
  int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }

  bool has_qparams() const { return qparams_.has_value(); }
  const QuantParams& qparams() const;
  void set_qparams(QuantParams qp);

  std::span<float> f32();
  std::span<const float> f32() const;
  std::span<uint16_t> f16();
  std::span<const uint16_t> f16() const;
  std::span<int8_t> i8();
  std::span<const int8_t> i8() const;
  std::span<int32_t> i32();
  std::span<const int32_t> i32() const;
  std::span<uint8_t> u8();
  std::span<const uint8_t> u8() const;

  std::span<std::byte> raw() { return data_; }
  std::span<const std::byte> raw() const { return data_; }

  /// Structural and bitwise equality (shape, dtype, qparams, buffer bytes).
  bool operator==(const Tensor& other) const;

  /// Throws InvalidArgument when the buffer length or qparams presence does
  /// not match shape and dtype.
  void validate(const std::string& context = "") const;

 private:
  Tensor(std::vector<int64_t> shape, DType dtype);

  std::vector<int64_t> shape_;
  DType dtype_ = DType::F32;
  std::vector<std::byte> data_;
  std::optional<QuantParams> qparams_;
};

int64_t shape_numel(std::span<const int64_t> shape);

// ---------------------------------------------------------------------------
// Scalar quantization primitives.
// ---------------------------------------------------------------------------

/// Symmetric int8 params for a tensor whose values lie in [-max_abs, max_abs]:
/// scale = max_abs / 127, zero point 0. A degenerate max_abs of zero yields
/// scale 1.
QuantParams choose_qparams_symmetric(float max_abs);

/// Asymmetric int8 params covering [min_v, max_v]. The range is first
/// extended to contain zero so that the real value 0.0 maps exactly onto the
/// zero point.
QuantParams choose_qparams_asymmetric(float min_v, float max_v);

/// q = clamp(round_half_even(x / scale) + zero_point, -128, 127) per element.
/// Per-channel params apply along their declared axis.
Tensor quantize_affine(const Tensor& x, const QuantParams& qp);

/// x = (q - zero_point) * scale per element.
Tensor dequantize(const Tensor& q);
Tensor dequantize(const Tensor& q, const QuantParams& qp);

/// Convert between f32 and f16 tensors (round-to-nearest-even on the way
/// down; exact on the way up).
Tensor tensor_to_f16(const Tensor& x);
Tensor tensor_to_f32(const Tensor& x);

}  // namespace eq

#endif  // EDGEQUANT_TENSOR_HPP_
