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

#ifndef EDGEQUANT_CONTAINER_HPP_
#define EDGEQUANT_CONTAINER_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "edgequant/graph.hpp"

namespace eq {

// .eqm container layout, all integers little-endian:
//   bytes 0..3   magic "EQM1"
//   bytes 4..7   u32 header length
//   header       UTF-8 JSON (graph structure, tensor table, quant metadata)
//   padding      zero bytes to the next 8-byte boundary
//   payload      raw tensor data; every record starts 8-byte aligned
//
// Serialization is deterministic: the same graph always produces the same
// bytes, so containers can be compared by hash.

std::vector<std::byte> serialize_model(const Graph& g);

/// Inverse of serialize_model. Throws ParseError naming the offending record
/// on malformed input.
Graph deserialize_model(std::span<const std::byte> bytes);

void save_model(const Graph& g, const std::string& path);
Graph load_model(const std::string& path);

}  // namespace eq

#endif  // EDGEQUANT_CONTAINER_HPP_
