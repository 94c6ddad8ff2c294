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
#include <vector>

#include "stitchfusion/rng.h"
#include "stitchfusion/tensor.h"

namespace stitchfusion {

enum class Mode { kTrain, kEval };

/// Mode plus the generator that stochastic layers draw from. Eval-mode
/// forwards never touch `rng`, so it may be null there.
struct ForwardContext {
  Mode mode = Mode::kEval;
  Rng* rng = nullptr;

  bool training() const { return mode == Mode::kTrain; }
};

// Linear algebra -----------------------------------------------------------

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// 2-D transpose.
Tensor transpose(const Tensor& a);
/// Same buffer contents under a new shape of equal element count.
Tensor reshape(const Tensor& a, Shape shape);

// Elementwise --------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
/// x[..., d] + bias[d], broadcast over every leading axis.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// Elementwise mean of equally shaped tensors, summed in list order.
Tensor mean_of(const std::vector<Tensor>& xs);

// Reductions ---------------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Normalization and activations -------------------------------------------

inline constexpr double kLayerNormEps = 1e-6;

/// Normalizes over the last axis, then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);
/// Softmax over the last axis with max subtraction.
Tensor softmax(const Tensor& x);
/// Exact GELU: x * Phi(x).
Tensor gelu(const Tensor& x);

/// Inverted dropout. Identity in eval mode or when p == 0.
Tensor dropout(const Tensor& x, double p, const ForwardContext& ctx);
/// Stochastic depth: zeroes whole rows of axis 0 with probability p and
/// rescales survivors by 1/(1-p). Identity in eval mode or when p == 0.
Tensor drop_path(const Tensor& x, double p, const ForwardContext& ctx);

// Layout -------------------------------------------------------------------

/// Concatenates 2-D tensors with equal row counts along columns.
Tensor concat_cols(const std::vector<Tensor>& xs);
/// Columns [start, start + count) of a 2-D tensor.
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);

/// Strided patch extraction on a token grid.
///
/// `x` is [height*width x channels] (row-major grid of tokens). The result is
/// [out_h*out_w x kernel*kernel*channels] with zero padding, each row laid out
/// as (ky, kx, channel).
Tensor extract_patches(const Tensor& x, std::size_t height, std::size_t width,
                       std::size_t kernel, std::size_t stride, std::size_t pad);
std::size_t patch_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                                std::size_t pad);

/// Bilinear resize of [c x h x w] to [c x out_h x out_w], align_corners=false.
/// Only upsampling (or identity) is supported.
Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

}  // namespace stitchfusion
