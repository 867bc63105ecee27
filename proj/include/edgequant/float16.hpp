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

#ifndef EDGEQUANT_FLOAT16_HPP_
#define EDGEQUANT_FLOAT16_HPP_

#include <bit>
#include <cstdint>

namespace eq {

// IEEE 754 binary16 <-> binary32 conversions. f32_to_f16 rounds to nearest
// even; values above the binary16 maximum (65504) become signed infinity,
// subnormals are produced where needed, and NaN payloads survive a round
// trip. f16_to_f32 is exact for every bit pattern.

inline uint16_t f32_to_f16(float value) {
  const uint32_t bits = std::bit_cast<uint32_t>(value);
  const uint16_t sign = static_cast<uint16_t>((bits >> 16) & 0x8000u);
  const int32_t exp = static_cast<int32_t>((bits >> 23) & 0xFFu);
  uint32_t mant = bits & 0x007FFFFFu;

  if (exp == 0xFF) {
    if (mant == 0) return sign | 0x7C00u;  // infinity
    uint16_t payload = static_cast<uint16_t>(mant >> 13);
    if (payload == 0) payload = 1;  // keep NaN a NaN
    return sign | 0x7C00u | payload;
  }

  const int32_t e = exp - 127 + 15;
  if (e >= 0x1F) return sign | 0x7C00u;  // overflow

  if (e <= 0) {
    // Result is subnormal (or zero). Shift the full significand, including
    // the implicit bit, and round half to even.
    if (e < -10) return sign;
    mant |= 0x00800000u;
    const uint32_t shift = static_cast<uint32_t>(14 - e);
    const uint32_t halfway = 1u << (shift - 1);
    const uint32_t rem = mant & ((1u << shift) - 1u);
    uint32_t rounded = mant >> shift;
    if (rem > halfway || (rem == halfway && (rounded & 1u))) ++rounded;
    // A carry out of the mantissa lands in the exponent field and yields
    // the smallest normal, which is the correctly rounded result.
    return sign | static_cast<uint16_t>(rounded);
  }

  uint32_t rounded = mant >> 13;
  const uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (rounded & 1u))) ++rounded;
  const uint32_t result = (static_cast<uint32_t>(e) << 10) + rounded;
  if (result >= 0x7C00u) return sign | 0x7C00u;  // rounded up to infinity
  return sign | static_cast<uint16_t>(result);
}

inline float f16_to_f32(uint16_t half) {
  const uint32_t sign = static_cast<uint32_t>(half & 0x8000u) << 16;
  uint32_t exp = (half >> 10) & 0x1Fu;
  uint32_t mant = half & 0x3FFu;

  uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      // Subnormal: normalize into a binary32 with exact value.
      exp = 113;  // biased exponent for 2^-14
      while ((mant & 0x400u) == 0) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3FFu;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 0x1F) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else {
    bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace eq

#endif  // EDGEQUANT_FLOAT16_HPP_
