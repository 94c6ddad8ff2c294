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

#include "stitchfusion/encoder.h"
#include "stitchfusion/nn.h"
#include "stitchfusion/tensor.h"

namespace stitchfusion {

/// Feature fusion module for one stage: concat(M x d) -> d, GELU, d -> d.
struct FfmStage {
  Linear fuse;
  Linear out;
};

struct FfmParams {
  std::vector<FfmStage> stages;

  static FfmParams init(std::size_t num_modalities, const std::vector<std::size_t>& dims, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn) const;
};

/// Merges M equally shaped [tokens x d] features. Without an FFM the result
/// is the elementwise mean; with one it is out(GELU(fuse(concat))).
Tensor modal_merge(const std::vector<Tensor>& features, const FfmStage* ffm = nullptr);

inline constexpr std::size_t kTinyDecoderDim = 64;
inline constexpr std::size_t kB2DecoderDim = 256;

/// All-MLP decode head.
struct DecoderParams {
  std::vector<Linear> stage_proj;  // d_i -> d_dec
  Linear fuse;                     // stages*d_dec -> d_dec, followed by GELU
  Linear classifier;               // d_dec -> num_classes

  static DecoderParams init(const std::vector<std::size_t>& dims, std::size_t decoder_dim,
                            std::size_t num_classes, Rng& rng);
  std::size_t num_classes() const { return classifier.out_features(); }
  void visit(const std::string& prefix, const ParamVisitor& fn) const;
};

/// Logits [num_classes x H1 x W1] at the resolution of the first stage.
Tensor decode_forward(const std::vector<FeatureMap>& pyramid, const DecoderParams& decoder);

/// Per-pixel argmax over [K x H x W]; ties resolve to the lowest class id.
std::vector<std::uint16_t> argmax_labels(const Tensor& logits);

/// LeCun-style truncated normal, std = 1/sqrt(fan_in), zero bias.
Linear scaled_linear(std::size_t in, std::size_t out, Rng& rng);

}  // namespace stitchfusion
