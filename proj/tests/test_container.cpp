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
#include <cstdio>
#include <random>

#include "doctest.h"
#include "edgequant/builders.hpp"
#include "edgequant/container.hpp"
#include "edgequant/quantize.hpp"
#include "oracle.hpp"

using namespace eq;

namespace {

Graph tiny() { return build_architecture(Family::TinyCnn, 4, {32, 32}, 7, {8, 3}); }

Tensor rand_batch(std::mt19937_64& gen) {
  Tensor t = Tensor::zeros({2, 32, 32, 3}, DType::F32);
  oracle::fill_uniform(t, gen, 0.0f, 1.0f);
  return t;
}

}  // namespace

TEST_CASE("round trip is bitwise identical") {
  const Graph g = tiny();
  const auto bytes = serialize_model(g);
  const Graph back = deserialize_model(bytes);
  CHECK(back == g);

  SUBCASE("serialization is deterministic") {
    CHECK(serialize_model(g) == serialize_model(back));
  }
}

TEST_CASE("quantized graphs round trip") {
  const Graph g = tiny();
  std::mt19937_64 gen(3);

  SUBCASE("fp16") {
    const Graph q = quantize_fp16(g);
    CHECK(deserialize_model(serialize_model(q)) == q);
  }
  SUBCASE("dynamic") {
    const Graph q = quantize_dynamic(g);
    CHECK(deserialize_model(serialize_model(q)) == q);
  }
  SUBCASE("full integer") {
    const CalibrationStats stats = calibrate(g, {rand_batch(gen), rand_batch(gen)});
    const Graph q = quantize_full(g, stats);
    const Graph back = deserialize_model(serialize_model(q));
    CHECK(back == q);
    // Requant multipliers and activation qparams survive the trip.
    bool saw_requant = false;
    for (const Node& n : back.nodes)
      if (!n.requant.empty()) saw_requant = true;
    CHECK(saw_requant);
  }
}

TEST_CASE("container header starts with the magic") {
  const auto bytes = serialize_model(tiny());
  REQUIRE(bytes.size() > 8);
  CHECK(static_cast<char>(bytes[0]) == 'E');
  CHECK(static_cast<char>(bytes[1]) == 'Q');
  CHECK(static_cast<char>(bytes[2]) == 'M');
  CHECK(static_cast<char>(bytes[3]) == '1');
}

TEST_CASE("payload dominates for large models") {
  const Graph g = build_architecture(Family::ResNet18, 5, {224, 224}, 0);
  const auto bytes = serialize_model(g);

  // Count every stored f32 element (weights plus BN running statistics).
  int64_t elems = 0;
  for (const Node& n : g.nodes)
    for (const Tensor& t : n.weights) elems += t.numel();
  const double payload = 4.0 * static_cast<double>(elems);
  const double total = static_cast<double>(bytes.size());
  CHECK(total >= payload);
  CHECK((total - payload) / total < 0.05);  // header under 5%

  // Container lands at the published scale: about 44.7 MB within 3%.
  CHECK(total >= 44.7e6 * 0.97);
  CHECK(total <= 44.7e6 * 1.03);
}

TEST_CASE("malformed input is rejected with the offending record named") {
  const Graph g = tiny();
  auto bytes = serialize_model(g);

  SUBCASE("bad magic") {
    bytes[0] = std::byte{'X'};
    CHECK_THROWS_AS(deserialize_model(bytes), ParseError);
  }
  SUBCASE("truncated header") {
    std::vector<std::byte> cut(bytes.begin(), bytes.begin() + 6);
    CHECK_THROWS_AS(deserialize_model(cut), ParseError);
  }
  SUBCASE("truncated payload") {
    std::vector<std::byte> cut(bytes.begin(), bytes.end() - 16);
    CHECK_THROWS_AS(deserialize_model(cut), ParseError);
  }
  SUBCASE("corrupted json header") {
    bytes[12] = std::byte{0xff};
    CHECK_THROWS_AS(deserialize_model(bytes), ParseError);
  }
  SUBCASE("error message names the record") {
    std::vector<std::byte> cut(bytes.begin(), bytes.end() - 16);
    try {
      deserialize_model(cut);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("container:") != std::string::npos);
    }
  }
}

TEST_CASE("file save and load") {
  const Graph g = tiny();
  const std::string path = "container_test_tmp.eqm";
  save_model(g, path);
  const Graph back = load_model(path);
  CHECK(back == g);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_model("does_not_exist.eqm"), DataError);
}

TEST_CASE("meta fields survive") {
  Graph g = tiny();
  g.meta.class_names = {"a", "b", "c", "d"};
  const Graph back = deserialize_model(serialize_model(g));
  CHECK(back.meta.class_names == g.meta.class_names);
  CHECK(back.meta.family == "tiny_cnn");
  CHECK(back.meta.num_classes == 4);
}
