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
#include <string>
#include <vector>

#include "stitchfusion/adapter.h"
#include "stitchfusion/encoder.h"
#include "stitchfusion/stitch.h"

namespace stitchfusion {

struct CountSpec {
  std::vector<std::size_t> dims;
  std::vector<std::size_t> depths;
  std::size_t rank = kDefaultAdapterRank;
  std::size_t modalities = 2;
  Density density = Density::kPairBidirectional;
  /// 0-based stage indices.
  std::vector<std::size_t> active_stages;
  bool include_biases = true;

  static CountSpec from_config(const EncoderConfig& config, std::size_t modalities, Density density,
                               std::vector<std::size_t> active_stages, std::size_t rank,
                               bool include_biases);
  void validate() const;
};

/// Closed-form adapter parameter total:
///   sum over active stages i of
///     (2 r d_i + r^2 [+ 2r + d_i]) * 2 positions * routes(m) * depth_i
/// with routes = 1 (shared), C(m,2) (pair-bi), 2 C(m,2) (pair-two-uni).
std::uint64_t analytic_count(const CountSpec& spec);

enum class ParamFilter { kTrainable, kAdaptersOnly, kFrozen, kAll };

std::uint64_t empirical_count(const AdapterBank& bank);
std::uint64_t empirical_count(const StitchModel& model, ParamFilter filter);

struct CountRow {
  std::string label;
  CountSpec spec;
  std::uint64_t analytic_with_bias = 0;
  std::uint64_t analytic_without_bias = 0;
  std::uint64_t empirical = 0;  // enumerated from a built bank
  bool agrees() const { return analytic_with_bias == empirical; }
};

/// Builds the bank for `spec`, enumerates it and compares with both
/// analytic conventions.
CountRow compare_counts(const std::string& label, const CountSpec& spec);

/// Millions rounded to two decimals, e.g. 144000 -> "0.14".
std::string format_millions(std::uint64_t count);

}  // namespace stitchfusion
