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
#include <functional>
#include <string>

#include "stitchfusion/ops.h"
#include "stitchfusion/rng.h"
#include "stitchfusion/tensor.h"

namespace stitchfusion {

/// Callback over named parameter tensors. Handles are shallow, so a visitor
/// can write through a copy of the handle.
using ParamVisitor = std::function<void(const std::string& name, const Tensor& param)>;

inline constexpr double kInitStd = 0.02;

/// y = x * weight + bias with weight stored [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear truncated_normal(std::size_t in, std::size_t out, Rng& rng, double std = kInitStd);
  static Linear zeros(std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  void visit(const std::string& prefix, const ParamVisitor& fn) const;
};

Tensor linear(const Tensor& x, const Linear& layer);

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;

  static LayerNormParams identity(std::size_t dim);
  void visit(const std::string& prefix, const ParamVisitor& fn) const;
};

Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

}  // namespace stitchfusion
