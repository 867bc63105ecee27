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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "edgequant/fixedpoint.hpp"
#include "oracle.hpp"

using namespace eq;

TEST_CASE("from_double decomposition") {
  SUBCASE("one half") {
    const FixedPointMultiplier m = FixedPointMultiplier::from_double(0.5);
    CHECK(m.m0 == 1073741824);  // 2^30
    CHECK(m.shift == 0);
    CHECK(m.real() == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("m0 always lands in [2^30, 2^31)") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> dist(1e-6, 4.0);
    for (int i = 0; i < 1000; ++i) {
      const double target = dist(gen);
      const FixedPointMultiplier m = FixedPointMultiplier::from_double(target);
      CHECK(m.m0 >= (int32_t{1} << 30));
      CHECK(m.real() == doctest::Approx(target).epsilon(1e-8));
    }
  }
  SUBCASE("targets below one use non-negative shifts") {
    CHECK(FixedPointMultiplier::from_double(0.1).shift >= 0);
    CHECK(FixedPointMultiplier::from_double(0.0009).shift >= 0);
  }
  SUBCASE("targets at or above one use negative shifts") {
    const FixedPointMultiplier m = FixedPointMultiplier::from_double(2.5);
    CHECK(m.shift < 0);
    CHECK(m.real() == doctest::Approx(2.5).epsilon(1e-8));
  }
}

TEST_CASE("requantization examples") {
  SUBCASE("zero accumulator") {
    CHECK(saturating_rounding_multiply(0, FixedPointMultiplier::from_double(0.73)) == 0);
  }
  SUBCASE("multiplier one half") {
    const FixedPointMultiplier m{1073741824, 0};
    CHECK(saturating_rounding_multiply(100, m) == 50);
  }
  SUBCASE("quarter") {
    CHECK(saturating_rounding_multiply(1000, FixedPointMultiplier::from_double(0.25)) == 250);
  }
}

TEST_CASE("requantization within one unit of the f64 oracle") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> dist(1e-5, 1.0);
  for (int t = 0; t < 100; ++t) {
    const double target = dist(gen);
    const FixedPointMultiplier m = FixedPointMultiplier::from_double(target);
    const double real = m.real();
    for (int32_t acc = -(1 << 15); acc <= (1 << 15); ++acc) {
      const int64_t ref = oracle::requant_ref(acc, real);
      const int64_t got = saturating_rounding_multiply(acc, m);
      if (std::abs(got - ref) > 1) {
        CAPTURE(target);
        CAPTURE(acc);
        REQUIRE(std::abs(got - ref) <= 1);
      }
    }
  }
}

TEST_CASE("large multipliers behave the same") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> dist(1.0, 8.0);
  for (int t = 0; t < 10; ++t) {
    const FixedPointMultiplier m = FixedPointMultiplier::from_double(dist(gen));
    const double real = m.real();
    for (int32_t acc = -(1 << 12); acc <= (1 << 12); acc += 7) {
      const int64_t ref = oracle::requant_ref(acc, real);
      CHECK(std::abs(saturating_rounding_multiply(acc, m) - ref) <= 1);
    }
  }
}

TEST_CASE("rejects non-positive or non-finite targets") {
  CHECK_THROWS_AS(FixedPointMultiplier::from_double(0.0), InvalidArgument);
  CHECK_THROWS_AS(FixedPointMultiplier::from_double(-0.5), InvalidArgument);
  CHECK_THROWS_AS(FixedPointMultiplier::from_double(std::nan("")), InvalidArgument);
}
