# Copyright 2026 The StitchFusion C++ Authors. All Rights Reserved.
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

"""Python access to the stitchfusion C++ core."""

import json as _json

from ._core import (
    GRAD_TOLERANCE,
    ConfigError,
    FormatError,
    TrainingError,
    empirical_param_count,
    equivalence_check,
    evaluate,
    evaluate_labels,
    grad_case_names,
    grad_check,
    param_count,
    synth_data,
    transparency_check,
)
from ._core import train as _train


def train(config=None, **overrides):
    """Train from a run-config dict (CLI config keys); keyword overrides win."""
    merged = dict(config or {})
    merged.update(overrides)
    return _train(_json.dumps(merged))


__all__ = [
    "GRAD_TOLERANCE",
    "ConfigError",
    "FormatError",
    "TrainingError",
    "empirical_param_count",
    "equivalence_check",
    "evaluate",
    "evaluate_labels",
    "grad_case_names",
    "grad_check",
    "param_count",
    "synth_data",
    "train",
    "transparency_check",
]
