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

#include "stitchfusion/grad_check.h"

namespace stitchfusion {

inline constexpr double kGradTolerance = 1e-4;

struct GradCase {
  std::string name;
  std::uint64_t seed = 0;
  GradCheckReport report;
};

struct GradSuiteOptions {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  double tolerance = kGradTolerance;
  /// Coordinates probed per parameter tensor in the end-to-end loss check;
  /// 0 probes all of them.
  std::size_t end_to_end_coords = 3;
  bool include_end_to_end = true;
};

struct GradSuiteResult {
  std::vector<GradCase> cases;
  double tolerance = kGradTolerance;

  double max_error() const;
  bool passed() const;
  /// Worst case per check name, one line each.
  std::vector<std::string> summary_lines() const;
};

using GradCaseCallback = std::function<void(const GradCase&)>;

/// Finite-difference checks of every primitive, the adapter, one stitched
/// block and the end-to-end tiny-preset loss, repeated for each seed.
GradSuiteResult run_grad_suite(const GradSuiteOptions& options = {}, const GradCaseCallback& on_case = {});

/// Names of the checks run_grad_suite performs for every seed.
std::vector<std::string> grad_case_names(bool include_end_to_end = true);

/// One grad case by name; throws std::invalid_argument for unknown names.
GradCase run_grad_case(const std::string& name, std::uint64_t seed, std::size_t end_to_end_coords = 3);

struct TransparencyReport {
  std::size_t configurations = 0;
  std::size_t matching = 0;
  std::vector<std::string> failures;

  bool passed() const { return configurations > 0 && matching == configurations; }
};

/// With every W_up/b_up at zero, stitched encoding must equal independent
/// per-modality encoding bit for bit, for each density and stage subset.
TransparencyReport transparency_check(std::uint64_t seed, std::size_t num_modalities = 2);

}  // namespace stitchfusion
