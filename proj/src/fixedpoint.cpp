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

#include "edgequant/fixedpoint.hpp"

#include <cmath>
#include <limits>

#include "edgequant/errors.hpp"

namespace eq {

FixedPointMultiplier FixedPointMultiplier::from_double(double target) {
  if (!(target > 0.0) || !std::isfinite(target))
    throw InvalidArgument("fixed-point multiplier target must be finite and positive");
  int exp = 0;
  const double q = std::frexp(target, &exp);  // q in [0.5, 1)
  int64_t m0 = static_cast<int64_t>(std::llround(q * (1ll << 31)));
  if (m0 == (1ll << 31)) {  // q rounded up to 1.0
    m0 >>= 1;
    ++exp;
  }
  FixedPointMultiplier m;
  m.m0 = static_cast<int32_t>(m0);
  m.shift = -exp;
  return m;
}

double FixedPointMultiplier::real() const {
  return static_cast<double>(m0) * std::ldexp(1.0, -31 - shift);
}

// gemmlowp-style SaturatingRoundingDoublingHighMul.
static int32_t doubling_high_mul(int32_t a, int32_t b) {
  const bool overflow = a == b && a == std::numeric_limits<int32_t>::min();
  const int64_t ab = static_cast<int64_t>(a) * static_cast<int64_t>(b);
  const int64_t nudge = ab >= 0 ? (1ll << 30) : (1 - (1ll << 30));
  const int32_t high = static_cast<int32_t>((ab + nudge) / (1ll << 31));
  return overflow ? std::numeric_limits<int32_t>::max() : high;
}

static int32_t rounding_right_shift(int32_t x, int s) {
  if (s <= 0) return x;
  const int32_t mask = static_cast<int32_t>((1ll << s) - 1);
  const int32_t rem = x & mask;
  const int32_t threshold = (mask >> 1) + (x < 0 ? 1 : 0);
  return (x >> s) + (rem > threshold ? 1 : 0);
}

int32_t saturating_rounding_multiply(int32_t acc, FixedPointMultiplier m) {
  if (m.shift >= 0) return rounding_right_shift(doubling_high_mul(acc, m.m0), m.shift);
  // Multiplier >= 1: saturating left shift first.
  const int64_t shifted = static_cast<int64_t>(acc) << (-m.shift);
  constexpr int64_t lo = std::numeric_limits<int32_t>::min();
  constexpr int64_t hi = std::numeric_limits<int32_t>::max();
  const int32_t sat = static_cast<int32_t>(shifted < lo ? lo : (shifted > hi ? hi : shifted));
  return doubling_high_mul(sat, m.m0);
}

}  // namespace eq
