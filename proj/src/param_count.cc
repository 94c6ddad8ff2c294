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

#include "stitchfusion/param_count.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace stitchfusion {

CountSpec CountSpec::from_config(const EncoderConfig& config, std::size_t modalities, Density density,
                                 std::vector<std::size_t> active_stages, std::size_t rank,
                                 bool include_biases) {
  CountSpec spec;
  spec.dims = config.dims();
  spec.depths = config.depths();
  spec.rank = rank;
  spec.modalities = modalities;
  spec.density = density;
  spec.active_stages = std::move(active_stages);
  spec.include_biases = include_biases;
  return spec;
}

void CountSpec::validate() const {
  if (dims.size() != depths.size()) throw std::invalid_argument("count spec: dims and depths differ in length");
  if (modalities < 2) throw std::invalid_argument("count spec: at least 2 modalities required");
  if (rank == 0) throw std::invalid_argument("count spec: rank must be positive");
  if (active_stages.empty()) throw std::invalid_argument("count spec: no active stages");
  for (std::size_t s : active_stages)
    if (s >= dims.size()) throw std::invalid_argument("count spec: active stage out of range");
}

std::uint64_t analytic_count(const CountSpec& spec) {
  spec.validate();
  const std::uint64_t r = spec.rank;
  const std::uint64_t routes = routes_per_position(spec.density, spec.modalities);
  std::vector<std::size_t> stages = spec.active_stages;
  std::sort(stages.begin(), stages.end());
  stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
  std::uint64_t total = 0;
  for (std::size_t s : stages) {
    const std::uint64_t d = spec.dims[s];
    std::uint64_t per_adapter = 2 * r * d + r * r;
    if (spec.include_biases) per_adapter += 2 * r + d;
    total += per_adapter * 2 * routes * spec.depths[s];
  }
  return total;
}

std::uint64_t empirical_count(const AdapterBank& bank) {
  std::uint64_t n = 0;
  bank.visit("", [&](const std::string&, const Tensor& t) { n += t.numel(); });
  return n;
}

std::uint64_t empirical_count(const StitchModel& model, ParamFilter filter) {
  std::uint64_t n = 0;
  auto add = [&](const std::string&, const Tensor& t) { n += t.numel(); };
  switch (filter) {
    case ParamFilter::kTrainable:
      model.visit_trainable(add);
      break;
    case ParamFilter::kAdaptersOnly:
      model.visit_adapters(add);
      break;
    case ParamFilter::kFrozen:
      model.visit([&](const std::string& name, const Tensor& t) {
        if (!t.requires_grad()) add(name, t);
      });
      break;
    case ParamFilter::kAll:
      model.visit(add);
      break;
  }
  return n;
}

CountRow compare_counts(const std::string& label, const CountSpec& spec) {
  spec.validate();
  CountRow row;
  row.label = label;
  row.spec = spec;
  CountSpec with = spec, without = spec;
  with.include_biases = true;
  without.include_biases = false;
  row.analytic_with_bias = analytic_count(with);
  row.analytic_without_bias = analytic_count(without);

  EncoderConfig config;
  config.preset = "count";
  for (std::size_t i = 0; i < spec.dims.size(); ++i) {
    StageConfig s;
    s.dim = spec.dims[i];
    s.depth = spec.depths[i];
    config.stages.push_back(s);
  }
  AdapterBank bank = build_adapter_bank(spec.modalities, config, DensityConfig{spec.density, spec.active_stages},
                                        spec.rank, 0);
  row.empirical = empirical_count(bank);
  return row;
}

std::string format_millions(std::uint64_t count) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", static_cast<double>(count) / 1e6);
  return buf;
}

}  // namespace stitchfusion
