# Copyright 2026 The EdgeQuant Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Compact CNN training, post-training quantization, and int8 inference."""

try:
    from ._edgequant import (
        CalibrationStats,
        CalibrationError,
        DataError,
        InvalidArgumentError,
        InvalidStateError,
        Model,
        ModelParseError,
        UnsupportedPatternError,
        synth,
    )
except ImportError:  # in-tree builds put the extension next to the package
    from _edgequant import (
        CalibrationStats,
        CalibrationError,
        DataError,
        InvalidArgumentError,
        InvalidStateError,
        Model,
        ModelParseError,
        UnsupportedPatternError,
        synth,
    )

__all__ = [
    "CalibrationStats",
    "CalibrationError",
    "DataError",
    "InvalidArgumentError",
    "InvalidStateError",
    "Model",
    "ModelParseError",
    "UnsupportedPatternError",
    "synth",
]

__version__ = "1.0.0"
