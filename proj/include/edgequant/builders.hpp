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

#ifndef EDGEQUANT_BUILDERS_HPP_
#define EDGEQUANT_BUILDERS_HPP_

#include <cstdint>
#include <string>
#include <utility>

#include "edgequant/graph.hpp"

namespace eq {

enum class Family { Vgg16, GoogLeNet, ResNet18, MobileNetV2, EfficientNetB0, TinyCnn };

Family family_from_string(const std::string& name);
const char* family_name(Family f);

struct TinyCnnConfig {
  int width = 8;  // channels of the first block; doubled per block
  int depth = 3;  // number of conv blocks
};

/// Builds the requested classifier topology with He-uniform weights drawn
/// deterministically from init_seed. Convolutions followed by a BatchNorm
/// carry no bias; GoogLeNet is built without auxiliary classifiers.
Graph build_architecture(Family family, int num_classes, std::pair<int, int> input_size,
                         uint64_t init_seed, const TinyCnnConfig& tiny = {});

/// Default input resolution per family.
std::pair<int, int> default_input_size(Family family);

}  // namespace eq

#endif  // EDGEQUANT_BUILDERS_HPP_
