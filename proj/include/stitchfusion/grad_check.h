// Copyright 2026 The StitchFusion C++ Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stitchfusion/tensor.h"

namespace stitchfusion {

inline constexpr double kGradCheckStep = 1e-4;

struct GradCheckReport {
  /// max |analytic - numeric| / max(1, |analytic|, |numeric|)
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  /// "input#index" of the worst coordinate.
  std::string worst;
};

/// Central-difference check of a scalar function against reverse mode.
///
/// `f` is re-evaluated with one coordinate of one input nudged by +-h; it must
/// read the inputs through the handles passed here. When `max_coords` is
/// non-zero, at most that many coordinates per input are probed, picked with
/// a seeded generator.
GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                           double h = kGradCheckStep, std::size_t max_coords = 0,
                           std::uint64_t sample_seed = 0);

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h = kGradCheckStep);

}  // namespace stitchfusion
