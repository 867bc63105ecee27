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
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "edgequant/dataset.hpp"
#include "oracle.hpp"

using namespace eq;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("dstest_tmp") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all("dstest_tmp"); }
};

Tensor solid(int64_t h, int64_t w, float r, float g, float b) {
  Tensor t = Tensor::zeros({h, w, 3}, DType::F32);
  auto s = t.f32();
  for (int64_t i = 0; i < h * w; ++i) {
    s[static_cast<std::size_t>(3 * i)] = r;
    s[static_cast<std::size_t>(3 * i + 1)] = g;
    s[static_cast<std::size_t>(3 * i + 2)] = b;
  }
  return t;
}

}  // namespace

TEST_CASE("ppm round trip") {
  TempDir dir("ppm");
  // Values on the byte grid survive exactly.
  Tensor img = Tensor::zeros({3, 5, 3}, DType::F32);
  auto s = img.f32();
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = static_cast<float>((i * 17) % 256) / 255.0f;
  const std::string path = (dir.path / "img.ppm").string();
  save_image(img, path);
  const Tensor back = load_image(path);
  REQUIRE(back.shape() == img.shape());
  for (std::size_t i = 0; i < s.size(); ++i)
    CHECK(back.f32()[i] == doctest::Approx(s[i]).epsilon(1e-6));
}

TEST_CASE("pgm loads as three replicated channels") {
  TempDir dir("pgm");
  Tensor gray = Tensor::zeros({4, 4, 1}, DType::F32);
  for (std::size_t i = 0; i < 16; ++i) gray.f32()[i] = static_cast<float>(i) / 255.0f;
  const std::string path = (dir.path / "img.pgm").string();
  save_image(gray, path);
  const Tensor back = load_image(path);
  REQUIRE(back.shape() == std::vector<int64_t>{4, 4, 3});
  for (int64_t i = 0; i < 16; ++i)
    for (int64_t c = 0; c < 3; ++c)
      CHECK(back.f32()[static_cast<std::size_t>(3 * i + c)] ==
            doctest::Approx(static_cast<double>(i) / 255.0).epsilon(1e-6));
}

TEST_CASE("pnm header parsing") {
  TempDir dir("hdr");
  SUBCASE("comments and whitespace are skipped") {
    const std::string path = (dir.path / "c.ppm").string();
    std::ofstream f(path, std::ios::binary);
    f << "P6\n# a comment\n 2 # trailing\n1\n# more\n255\n";
    const char px[6] = {0, 127, (char)255, 10, 20, 30};
    f.write(px, 6);
    f.close();
    const Tensor img = load_image(path);
    CHECK(img.shape() == std::vector<int64_t>{1, 2, 3});
    CHECK(img.f32()[2] == doctest::Approx(1.0));
  }
  SUBCASE("maxval other than 255 is rejected") {
    const std::string path = (dir.path / "m.ppm").string();
    std::ofstream f(path, std::ios::binary);
    f << "P6\n1 1\n65535\n";
    f.write("\0\0\0\0\0\0", 6);
    f.close();
    try {
      load_image(path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("m.ppm") != std::string::npos);
    }
  }
  SUBCASE("unknown magic is rejected") {
    const std::string path = (dir.path / "x.ppm").string();
    std::ofstream f(path, std::ios::binary);
    f << "P3\n1 1\n255\n0 0 0\n";
    f.close();
    CHECK_THROWS_AS(load_image(path), DataError);
  }
  SUBCASE("truncated pixels are rejected") {
    const std::string path = (dir.path / "t.ppm").string();
    std::ofstream f(path, std::ios::binary);
    f << "P6\n2 2\n255\n";
    f.write("\0\0\0", 3);
    f.close();
    CHECK_THROWS_AS(load_image(path), DataError);
  }
  SUBCASE("missing file names the path") {
    try {
      load_image((dir.path / "nope.ppm").string());
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("nope.ppm") != std::string::npos);
    }
  }
}

TEST_CASE("bilinear resize") {
  SUBCASE("identity at the same size") {
    Tensor img = solid(3, 3, 0.2f, 0.4f, 0.6f);
    img.f32()[0] = 0.9f;
    CHECK(resize_bilinear(img, 3, 3) == img);
  }
  SUBCASE("constant image stays constant") {
    const Tensor img = solid(8, 8, 0.3f, 0.5f, 0.7f);
    const Tensor up = resize_bilinear(img, 16, 16);
    for (int64_t i = 0; i < up.numel() / 3; ++i) {
      CHECK(up.f32()[static_cast<std::size_t>(3 * i)] == doctest::Approx(0.3).epsilon(1e-6));
      CHECK(up.f32()[static_cast<std::size_t>(3 * i + 1)] == doctest::Approx(0.5).epsilon(1e-6));
      CHECK(up.f32()[static_cast<std::size_t>(3 * i + 2)] == doctest::Approx(0.7).epsilon(1e-6));
    }
  }
  SUBCASE("2x2 upsample matches the scalar oracle") {
    const Tensor img = Tensor::from_f32({2, 2, 1}, {0.0f, 1.0f, 2.0f, 3.0f});
    const Tensor up = resize_bilinear(img, 4, 4);
    const oracle::Array ref = oracle::bilinear(oracle::from_tensor(img), 4, 4);
    REQUIRE(up.shape() == ref.shape);
    const auto s = up.f32();
    CHECK(oracle::rel_err(std::vector<float>(s.begin(), s.end()), ref.v) <= 1e-6);
  }
  SUBCASE("random images match the scalar oracle both ways") {
    std::mt19937_64 gen(3);
    Tensor img = Tensor::zeros({7, 5, 3}, DType::F32);
    oracle::fill_uniform(img, gen, 0.0f, 1.0f);
    for (auto [oh, ow] : {std::pair<int64_t, int64_t>{13, 9}, {3, 2}, {7, 5}}) {
      const Tensor out = resize_bilinear(img, oh, ow);
      const oracle::Array ref = oracle::bilinear(oracle::from_tensor(img), oh, ow);
      const auto s = out.f32();
      CHECK(oracle::rel_err(std::vector<float>(s.begin(), s.end()), ref.v) <= 1e-6);
    }
  }
}

TEST_CASE("directory ingestion") {
  TempDir dir("tree");
  // Two classes, three files each; names chosen to test lexicographic order.
  fs::create_directories(dir.path / "root" / "scab");
  fs::create_directories(dir.path / "root" / "healthy");
  int v = 0;
  for (const char* cls : {"healthy", "scab"})
    for (const char* name : {"b.ppm", "a.ppm", "c.ppm"}) {
      save_image(solid(6, 6, 0.1f * static_cast<float>(++v), 0.2f, 0.3f),
                 (dir.path / "root" / cls / name).string());
    }
  const LabeledDataset ds = load_image_dir((dir.path / "root").string(), {4, 4});
  CHECK(ds.samples.size() == 6);
  CHECK(ds.class_names == std::vector<std::string>{"healthy", "scab"});
  CHECK(ds.per_class_counts() == std::vector<int64_t>{3, 3});
  for (const Sample& s : ds.samples)
    CHECK(s.image.shape() == std::vector<int64_t>{4, 4, 3});
  // First three samples belong to class 0 (sorted dirs, sorted files).
  CHECK(ds.samples[0].label == 0);
  CHECK(ds.samples[3].label == 1);

  SUBCASE("missing root") {
    CHECK_THROWS_AS(load_image_dir((dir.path / "missing").string(), {4, 4}), DataError);
  }
}

TEST_CASE("manifest ingestion") {
  TempDir dir("mani");
  fs::create_directories(dir.path / "imgs");
  save_image(solid(4, 4, 0.5f, 0.5f, 0.5f), (dir.path / "imgs" / "one.ppm").string());
  save_image(solid(4, 4, 0.9f, 0.1f, 0.1f), (dir.path / "imgs" / "two.ppm").string());
  const std::string mpath = (dir.path / "list.tsv").string();
  {
    std::ofstream m(mpath);
    m << "imgs/one.ppm\tscab\n";
    m << "imgs/two.ppm\thealthy\n";
  }
  const LabeledDataset ds = load_manifest(mpath, {4, 4});
  CHECK(ds.samples.size() == 2);
  CHECK(ds.class_names == std::vector<std::string>{"healthy", "scab"});
  CHECK(ds.samples[0].label == 1);  // scab sorts after healthy
  CHECK(ds.samples[1].label == 0);

  SUBCASE("malformed line names the manifest") {
    const std::string bad = (dir.path / "bad.tsv").string();
    std::ofstream m(bad);
    m << "no_tab_here\n";
    m.close();
    try {
      load_manifest(bad, {4, 4});
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("bad.tsv") != std::string::npos);
    }
  }
}

TEST_CASE("split") {
  auto make_ds = [](const std::vector<int>& per_class) {
    LabeledDataset ds;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
      ds.class_names.push_back("c" + std::to_string(c));
      for (int i = 0; i < per_class[c]; ++i) {
        Sample s;
        s.image = Tensor::from_f32({1, 1, 1}, {static_cast<float>(i)});
        s.label = static_cast<int>(c);
        ds.samples.push_back(std::move(s));
      }
    }
    return ds;
  };

  SUBCASE("degenerate all-train") {
    const LabeledDataset ds = make_ds({5, 3});
    const auto parts = split(ds, {1.0, 0.0, 0.0, 0, true});
    CHECK(parts[0].samples.size() == 8);
    CHECK(parts[1].samples.size() == 0);
    CHECK(parts[2].samples.size() == 0);
  }

  SUBCASE("stratified 70/15/15") {
    const LabeledDataset ds = make_ds({100, 100, 100});
    const auto parts = split(ds, {0.70, 0.15, 0.15, 3, true});
    CHECK(parts[0].samples.size() == 210);
    CHECK(parts[1].samples.size() == 45);
    CHECK(parts[2].samples.size() == 45);
    CHECK(parts[0].per_class_counts() == std::vector<int64_t>{70, 70, 70});
    CHECK(parts[1].per_class_counts() == std::vector<int64_t>{15, 15, 15});
    CHECK(parts[2].per_class_counts() == std::vector<int64_t>{15, 15, 15});
  }

  SUBCASE("cumulative flooring on odd sizes") {
    const LabeledDataset ds = make_ds({7});
    const auto parts = split(ds, {0.5, 0.25, 0.25, 0, true});
    CHECK(parts[0].samples.size() == 3);  // floor(3.5)
    CHECK(parts[1].samples.size() == 2);  // floor(5.25) - 3
    CHECK(parts[2].samples.size() == 2);
  }

  SUBCASE("deterministic under the seed and disjoint") {
    const LabeledDataset ds = make_ds({20, 20});
    const auto a = split(ds, {0.6, 0.2, 0.2, 9, true});
    const auto b = split(ds, {0.6, 0.2, 0.2, 9, true});
    for (int p = 0; p < 3; ++p) {
      REQUIRE(a[p].samples.size() == b[p].samples.size());
      for (std::size_t i = 0; i < a[p].samples.size(); ++i) {
        CHECK(a[p].samples[i].label == b[p].samples[i].label);
        CHECK(a[p].samples[i].image == b[p].samples[i].image);
      }
    }
    const auto c = split(ds, {0.6, 0.2, 0.2, 10, true});
    std::size_t total = 0;
    for (int p = 0; p < 3; ++p) total += c[p].samples.size();
    CHECK(total == 40);
  }

  SUBCASE("ratios must sum to one") {
    const LabeledDataset ds = make_ds({4});
    CHECK_THROWS_AS(split(ds, {0.5, 0.2, 0.2, 0, true}), InvalidArgument);
  }
}

TEST_CASE("synthetic dataset") {
  SynthSpec spec;
  spec.num_classes = 4;
  spec.per_class = 25;
  spec.h = spec.w = 16;
  spec.seed = 7;

  SUBCASE("deterministic under the seed") {
    spec.noise = 0.1f;
    const LabeledDataset a = synth_generate(spec);
    const LabeledDataset b = synth_generate(spec);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      CHECK(a.samples[i].image == b.samples[i].image);
      CHECK(a.samples[i].label == b.samples[i].label);
    }
  }

  SUBCASE("noise zero collapses each class to its template") {
    spec.noise = 0.0f;
    const LabeledDataset ds = synth_generate(spec);
    for (const Sample& s : ds.samples)
      CHECK(s.image == synth_template(spec, s.label));
  }

  SUBCASE("nearest-template classification") {
    std::vector<Tensor> templates;
    for (int c = 0; c < spec.num_classes; ++c) templates.push_back(synth_template(spec, c));
    auto classify = [&](const Tensor& img) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < spec.num_classes; ++c) {
        double d = 0.0;
        for (int64_t i = 0; i < img.numel(); ++i) {
          const double diff = static_cast<double>(img.f32()[static_cast<std::size_t>(i)]) -
                              static_cast<double>(templates[static_cast<std::size_t>(c)]
                                                      .f32()[static_cast<std::size_t>(i)]);
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      return best;
    };

    spec.noise = 0.0f;
    LabeledDataset clean = synth_generate(spec);
    int hits = 0;
    for (const Sample& s : clean.samples) hits += classify(s.image) == s.label;
    CHECK(hits == static_cast<int>(clean.samples.size()));  // 100% at zero noise

    spec.noise = 0.1f;
    spec.per_class = 100;
    LabeledDataset noisy = synth_generate(spec);
    hits = 0;
    for (const Sample& s : noisy.samples) hits += classify(s.image) == s.label;
    CHECK(static_cast<double>(hits) >= 0.99 * static_cast<double>(noisy.samples.size()));
  }

  SUBCASE("pixels stay in range under noise") {
    spec.noise = 0.45f;
    const LabeledDataset ds = synth_generate(spec);
    for (const Sample& s : ds.samples)
      for (const float v : s.image.f32()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
  }

  SUBCASE("argument validation") {
    SynthSpec bad = spec;
    bad.num_classes = 1;
    CHECK_THROWS_AS(synth_generate(bad), InvalidArgument);
    bad = spec;
    bad.noise = 0.9f;
    CHECK_THROWS_AS(synth_generate(bad), InvalidArgument);
    bad = spec;
    bad.per_class = 0;
    CHECK_THROWS_AS(synth_generate(bad), InvalidArgument);
  }
}

TEST_CASE("batch_of stacks samples") {
  SynthSpec spec;
  spec.num_classes = 2;
  spec.per_class = 3;
  spec.h = spec.w = 8;
  spec.noise = 0.0f;
  const LabeledDataset ds = synth_generate(spec);
  const Tensor b = batch_of(ds, {0, 3, 5});
  REQUIRE(b.shape() == std::vector<int64_t>{3, 8, 8, 3});
  for (int64_t i = 0; i < 8 * 8 * 3; ++i) {
    CHECK(b.f32()[static_cast<std::size_t>(i)] ==
          ds.samples[0].image.f32()[static_cast<std::size_t>(i)]);
    CHECK(b.f32()[static_cast<std::size_t>(8 * 8 * 3 + i)] ==
          ds.samples[3].image.f32()[static_cast<std::size_t>(i)]);
  }
  CHECK_THROWS_AS(batch_of(ds, {0, 99}), InvalidArgument);
}
