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

#ifndef EDGEQUANT_DATASET_HPP_
#define EDGEQUANT_DATASET_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "edgequant/tensor.hpp"

namespace eq {

struct Sample {
  Tensor image;  // HWC f32 in [0, 1]
  int label = 0;
};

struct LabeledDataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<int64_t> per_class_counts() const;
};

struct SplitSpec {
  double train = 0.70, val = 0.15, test = 0.15;
  uint64_t seed = 0;
  bool stratified = true;
};

/// Decodes a binary PPM (P6) or PGM (P5) file with maxval 255 into an HWC
/// f32 tensor scaled to [0,1]; grayscale replicates to 3 channels.
Tensor load_image(const std::string& path);

/// Writes an HWC f32 tensor in [0,1] as binary PPM (3 channels) or PGM (1).
void save_image(const Tensor& img, const std::string& path);

/// Loads `root/<class_name>/<file>`; class names are the sorted
/// subdirectory names, files sorted within each class. Empty class
/// directories warn but keep the class.
LabeledDataset load_image_dir(const std::string& root, std::pair<int, int> target_size);

/// Alternative ingestion: a text manifest of `relative_path<TAB>class`
/// lines, resolved against the manifest's directory.
LabeledDataset load_manifest(const std::string& path, std::pair<int, int> target_size);

/// Align-corners-false bilinear resize of an HWC tensor.
Tensor resize_bilinear(const Tensor& img, int64_t out_h, int64_t out_w);

/// Deterministic (stratified) split into train/val/test.
std::array<LabeledDataset, 3> split(const LabeledDataset& ds, const SplitSpec& spec);

struct SynthSpec {
  int num_classes = 4;
  int per_class = 500;
  int h = 32, w = 32;
  float noise = 0.1f;
  uint64_t seed = 0;
};

/// Synthetic classification set: per class, one geometric template in a
/// distinct hue plus uniform pixel noise. Deterministic under the seed.
LabeledDataset synth_generate(const SynthSpec& spec);

/// The noise-free class template, as used by synth_generate.
Tensor synth_template(const SynthSpec& spec, int cls);

/// Stacks samples[indices] into one NHWC batch.
Tensor batch_of(const LabeledDataset& ds, const std::vector<int64_t>& indices);

}  // namespace eq

#endif  // EDGEQUANT_DATASET_HPP_
