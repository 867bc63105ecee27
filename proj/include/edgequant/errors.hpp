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

#ifndef EDGEQUANT_ERRORS_HPP_
#define EDGEQUANT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace eq {

/// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The object is in a state that does not admit the operation
/// (e.g. quantizing an already-quantized graph).
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// A file or byte stream could not be decoded. The message names the
/// offending record or file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// The graph contains a structure the transform does not handle.
class UnsupportedPattern : public Error {
 public:
  using Error::Error;
};

/// Calibration statistics are missing or incomplete.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// A dataset file or directory could not be read.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace eq

#endif  // EDGEQUANT_ERRORS_HPP_
