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

#include "edgequant/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

namespace eq {

namespace fs = std::filesystem;

std::vector<int64_t> LabeledDataset::per_class_counts() const {
  std::vector<int64_t> counts(class_names.size(), 0);
  for (const Sample& s : samples) counts.at(static_cast<std::size_t>(s.label)) += 1;
  return counts;
}

namespace {

// Skips whitespace and '#' comment lines, then reads one unsigned integer.
int read_pnm_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) throw DataError("image '" + path + "': malformed header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = in.get();
  }
  return value;
}

}  // namespace

Tensor load_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open image '" + path + "'");
  char m0 = 0, m1 = 0;
  f.get(m0);
  f.get(m1);
  const bool color = m0 == 'P' && m1 == '6';
  const bool gray = m0 == 'P' && m1 == '5';
  if (!color && !gray)
    throw DataError("image '" + path + "': unsupported format (need binary P6 or P5)");
  const int w = read_pnm_int(f, path);
  const int h = read_pnm_int(f, path);
  const int maxval = read_pnm_int(f, path);
  if (w <= 0 || h <= 0) throw DataError("image '" + path + "': bad dimensions");
  if (maxval != 255) throw DataError("image '" + path + "': maxval must be 255");
  // The single whitespace byte after maxval was already consumed by the
  // integer reader.
  const std::size_t pixel_bytes = static_cast<std::size_t>(w) * h * (color ? 3 : 1);
  std::vector<unsigned char> raw(pixel_bytes);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixel_bytes));
  if (static_cast<std::size_t>(f.gcount()) != pixel_bytes)
    throw DataError("image '" + path + "': truncated pixel data");

  Tensor img = Tensor::zeros({h, w, 3}, DType::F32);
  auto out = img.f32();
  for (int64_t i = 0; i < static_cast<int64_t>(w) * h; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      const unsigned char v = color ? raw[static_cast<std::size_t>(i) * 3 + ch]
                                    : raw[static_cast<std::size_t>(i)];
      out[i * 3 + ch] = static_cast<float>(v) / 255.0f;
    }
  }
  return img;
}

void save_image(const Tensor& img, const std::string& path) {
  if (img.rank() != 3) throw InvalidArgument("save_image: expected HWC tensor");
  const int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  if (c != 1 && c != 3) throw InvalidArgument("save_image: expected 1 or 3 channels");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << (c == 3 ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
  const auto in = img.f32();
  std::vector<unsigned char> raw(static_cast<std::size_t>(h * w * c));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const float v = std::clamp(in[static_cast<int64_t>(i)], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw DataError("short write to '" + path + "'");
}

Tensor resize_bilinear(const Tensor& img, int64_t out_h, int64_t out_w) {
  if (img.rank() != 3) throw InvalidArgument("resize_bilinear: expected HWC tensor");
  if (out_h < 1 || out_w < 1) throw InvalidArgument("resize_bilinear: bad target size");
  const int64_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
  if (h == out_h && w == out_w) return img;
  Tensor out = Tensor::zeros({out_h, out_w, c}, DType::F32);
  const float* src = img.f32().data();
  float* dst = out.f32().data();
  const double scale_y = static_cast<double>(h) / static_cast<double>(out_h);
  const double scale_x = static_cast<double>(w) / static_cast<double>(out_w);
  for (int64_t oy = 0; oy < out_h; ++oy) {
    const double sy = std::max(0.0, (oy + 0.5) * scale_y - 0.5);
    const int64_t y0 = std::min<int64_t>(static_cast<int64_t>(sy), h - 1);
    const int64_t y1 = std::min<int64_t>(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (int64_t ox = 0; ox < out_w; ++ox) {
      const double sx = std::max(0.0, (ox + 0.5) * scale_x - 0.5);
      const int64_t x0 = std::min<int64_t>(static_cast<int64_t>(sx), w - 1);
      const int64_t x1 = std::min<int64_t>(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      for (int64_t ch = 0; ch < c; ++ch) {
        const double v00 = src[(y0 * w + x0) * c + ch];
        const double v01 = src[(y0 * w + x1) * c + ch];
        const double v10 = src[(y1 * w + x0) * c + ch];
        const double v11 = src[(y1 * w + x1) * c + ch];
        const double top = v00 + (v01 - v00) * fx;
        const double bot = v10 + (v11 - v10) * fx;
        dst[(oy * out_w + ox) * c + ch] = static_cast<float>(top + (bot - top) * fy);
      }
    }
  }
  return out;
}

namespace {

Tensor load_and_resize(const std::string& path, std::pair<int, int> target) {
  return resize_bilinear(load_image(path), target.first, target.second);
}

}  // namespace

LabeledDataset load_image_dir(const std::string& root, std::pair<int, int> target_size) {
  if (!fs::is_directory(root)) throw DataError("dataset root '" + root + "' is not a directory");
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw DataError("dataset root '" + root + "' has no class directories");

  LabeledDataset ds;
  ds.class_names = classes;
  for (std::size_t label = 0; label < classes.size(); ++label) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(root) / classes[label]))
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
      std::cerr << "warning: class directory '" << classes[label] << "' is empty\n";
    for (const std::string& file : files)
      ds.samples.push_back({load_and_resize(file, target_size), static_cast<int>(label)});
  }
  return ds;
}

LabeledDataset load_manifest(const std::string& path, std::pair<int, int> target_size) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  std::vector<std::pair<std::string, std::string>> entries;  // (relpath, class)
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw DataError("manifest '" + path + "': bad line " + std::to_string(lineno));
    entries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  if (entries.empty()) throw DataError("manifest '" + path + "' lists no samples");

  std::vector<std::string> classes;
  for (const auto& [rel, cls] : entries) classes.push_back(cls);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  LabeledDataset ds;
  ds.class_names = classes;
  for (const auto& [rel, cls] : entries) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), cls);
    ds.samples.push_back({load_and_resize((base / rel).string(), target_size),
                          static_cast<int>(it - classes.begin())});
  }
  return ds;
}

std::array<LabeledDataset, 3> split(const LabeledDataset& ds, const SplitSpec& spec) {
  if (spec.train < 0 || spec.val < 0 || spec.test < 0 ||
      std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
    throw InvalidArgument("split: ratios must be non-negative and sum to 1");

  std::array<LabeledDataset, 3> out;
  for (auto& part : out) part.class_names = ds.class_names;

  std::mt19937_64 gen(spec.seed);
  auto shuffle_indices = [&gen](std::vector<int64_t>& idx) {
    // Fisher-Yates with explicit bounded draws; std::shuffle's sequence of
    // calls is implementation-defined.
    for (std::size_t i = idx.size(); i > 1; --i) {
      const uint64_t j = gen() % i;
      std::swap(idx[i - 1], idx[j]);
    }
  };
  auto assign = [&](const std::vector<int64_t>& idx) {
    const double n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::floor(n * spec.train));
    const auto n_train_val = static_cast<std::size_t>(std::floor(n * (spec.train + spec.val)));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t part = i < n_train ? 0 : (i < n_train_val ? 1 : 2);
      out[part].samples.push_back(ds.samples[static_cast<std::size_t>(idx[i])]);
    }
  };

  if (spec.stratified) {
    for (int cls = 0; cls < ds.num_classes(); ++cls) {
      std::vector<int64_t> idx;
      for (std::size_t i = 0; i < ds.samples.size(); ++i)
        if (ds.samples[i].label == cls) idx.push_back(static_cast<int64_t>(i));
      shuffle_indices(idx);
      assign(idx);
    }
  } else {
    std::vector<int64_t> idx(ds.samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    shuffle_indices(idx);
    assign(idx);
  }
  return out;
}

namespace {

void hsv_to_rgb(double hue, double sat, double val, float rgb[3]) {
  hue = hue - std::floor(hue);
  const double h6 = hue * 6.0;
  const int sector = static_cast<int>(h6) % 6;
  const double f = h6 - std::floor(h6);
  const double p = val * (1.0 - sat);
  const double q = val * (1.0 - sat * f);
  const double t = val * (1.0 - sat * (1.0 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = val, g = t, b = p; break;
    case 1: r = q, g = val, b = p; break;
    case 2: r = p, g = val, b = t; break;
    case 3: r = p, g = q, b = val; break;
    case 4: r = t, g = p, b = val; break;
    default: r = val, g = p, b = q; break;
  }
  rgb[0] = static_cast<float>(r);
  rgb[1] = static_cast<float>(g);
  rgb[2] = static_cast<float>(b);
}

}  // namespace

Tensor synth_template(const SynthSpec& spec, int cls) {
  const int64_t h = spec.h, w = spec.w;
  Tensor img = Tensor::zeros({h, w, 3}, DType::F32);
  auto px = img.f32();
  float fg[3], bg[3];
  const double hue = static_cast<double>(cls) / std::max(1, spec.num_classes);
  hsv_to_rgb(hue, 0.9, 0.9, fg);
  hsv_to_rgb(hue + 0.5, 0.5, 0.25, bg);
  const bool invert = cls >= 4;
  const int pattern = cls % 4;
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  const double radius = std::min(h, w) / 3.0;
  const int64_t cell = std::max<int64_t>(1, std::min(h, w) / 4);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      float* p = &px[(y * w + x) * 3];
      double mix;  // 1 foreground, 0 background
      switch (pattern) {
        case 0: {
          const double d = std::hypot(y - cy, x - cx);
          mix = d <= radius ? 1.0 : 0.0;
          break;
        }
        case 1:
          mix = (y >= h / 3 && y < 2 * h / 3) ? 1.0 : 0.0;
          break;
        case 2:
          mix = ((y / cell + x / cell) % 2 == 0) ? 1.0 : 0.0;
          break;
        default:
          mix = static_cast<double>(x + y) / static_cast<double>(h + w - 2);
          break;
      }
      if (invert) mix = 1.0 - mix;
      for (int ch = 0; ch < 3; ++ch)
        p[ch] = static_cast<float>(bg[ch] + (fg[ch] - bg[ch]) * mix);
    }
  }
  return img;
}

LabeledDataset synth_generate(const SynthSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > 8)
    throw InvalidArgument("synth_generate: num_classes must be in [2, 8]");
  if (spec.noise < 0.0f || spec.noise >= 0.5f)
    throw InvalidArgument("synth_generate: noise must be in [0, 0.5)");
  if (spec.per_class < 1 || spec.h < 4 || spec.w < 4)
    throw InvalidArgument("synth_generate: bad size parameters");

  LabeledDataset ds;
  for (int cls = 0; cls < spec.num_classes; ++cls)
    ds.class_names.push_back("class_" + std::to_string(cls));

  std::mt19937_64 gen(spec.seed);
  const double amp = 2.0 * static_cast<double>(spec.noise);
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    const Tensor tmpl = synth_template(spec, cls);
    for (int i = 0; i < spec.per_class; ++i) {
      Tensor img = tmpl;
      if (spec.noise > 0.0f) {
        auto px = img.f32();
        for (auto& v : px) {
          const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0,1)
          v = std::clamp(v + static_cast<float>((u - 0.5) * amp), 0.0f, 1.0f);
        }
      }
      ds.samples.push_back({std::move(img), cls});
    }
  }
  return ds;
}

Tensor batch_of(const LabeledDataset& ds, const std::vector<int64_t>& indices) {
  if (indices.empty()) throw InvalidArgument("batch_of: no indices");
  for (const int64_t idx : indices)
    if (idx < 0 || idx >= static_cast<int64_t>(ds.samples.size()))
      throw InvalidArgument("batch_of: index " + std::to_string(idx) + " out of range");
  const auto& shape = ds.samples[static_cast<std::size_t>(indices[0])].image.shape();
  Tensor batch =
      Tensor::zeros({static_cast<int64_t>(indices.size()), shape[0], shape[1], shape[2]},
                    DType::F32);
  const int64_t stride = shape[0] * shape[1] * shape[2];
  auto out = batch.f32();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& img = ds.samples[static_cast<std::size_t>(indices[i])].image;
    if (img.shape() != shape) throw InvalidArgument("batch_of: mixed image shapes");
    const auto src = img.f32();
    std::copy(src.begin(), src.end(), out.begin() + static_cast<int64_t>(i) * stride);
  }
  return batch;
}

}  // namespace eq
