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

#ifndef EDGEQUANT_FIXEDPOINT_HPP_
#define EDGEQUANT_FIXEDPOINT_HPP_

#include <cstdint>

namespace eq {

/// A real multiplier stored as m0 * 2^-31 * 2^-shift with m0 a Q31 value in
/// [2^30, 2^31), i.e. [0.5, 1). For targets in (0, 1) the shift is
/// non-negative; targets >= 1 are representable with a negative shift.
struct FixedPointMultiplier {
  int32_t m0 = 0;
  int32_t shift = 0;

  static FixedPointMultiplier from_double(double target);
  double real() const;

  bool operator==(const FixedPointMultiplier&) const = default;
};

/// round(acc * m) in pure integer arithmetic: a saturating doubling high
/// multiply followed by a rounding right shift. Matches the f64 reference
/// within one unit.
int32_t saturating_rounding_multiply(int32_t acc, FixedPointMultiplier m);

}  // namespace eq

#endif  // EDGEQUANT_FIXEDPOINT_HPP_
