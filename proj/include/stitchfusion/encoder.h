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
#include <string>
#include <vector>

#include "stitchfusion/nn.h"
#include "stitchfusion/ops.h"
#include "stitchfusion/rng.h"
#include "stitchfusion/tensor.h"

namespace stitchfusion {

struct StageConfig {
  std::size_t dim = 0;
  std::size_t depth = 0;
  std::size_t heads = 1;
  std::size_t patch_size = 3;
  std::size_t stride = 2;
  std::size_t sr_ratio = 1;  // spatial reduction of keys/values
};

/// Hierarchical transformer encoder layout, shared by every modality.
struct EncoderConfig {
  std::string preset = "custom";
  std::size_t in_channels = 3;
  std::vector<StageConfig> stages;
  std::size_t mlp_ratio = 4;
  /// Largest stochastic-depth rate; blocks ramp linearly from 0 to it.
  double drop_path_rate = 0.0;

  /// dims [16,32,64,128], depths [2,2,2,2], heads [1,2,4,8].
  static EncoderConfig tiny(std::size_t in_channels = 3);
  /// dims [64,128,320,512], depths [3,4,6,3].
  static EncoderConfig b2_like(std::size_t in_channels = 3);
  /// "tiny" or "b2-like"; throws std::invalid_argument otherwise.
  static EncoderConfig from_preset(const std::string& name, std::size_t in_channels = 3);

  void validate() const;
  std::size_t num_stages() const { return stages.size(); }
  std::size_t total_depth() const;
  /// Product of all stage strides.
  std::size_t total_stride() const;
  std::vector<std::size_t> dims() const;
  std::vector<std::size_t> depths() const;
  /// Stochastic-depth rate of block `block` in stage `stage`.
  double block_drop_path(std::size_t stage, std::size_t block) const;
};

/// A token grid: `tokens` is [height*width x channels].
struct FeatureMap {
  Tensor tokens;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t channels() const { return tokens.dim(1); }
  /// [channels x height x width] view of the same values.
  Tensor to_chw() const;
  static FeatureMap from_chw(const Tensor& chw);
};

struct AttentionParams {
  Linear q, k, v, proj;
  // Only populated when sr_ratio > 1.
  Linear sr;
  LayerNormParams sr_norm;

  void visit(const std::string& prefix, const ParamVisitor& fn) const;
};

struct TransformerBlock {
  LayerNormParams norm1;
  AttentionParams attn;
  LayerNormParams norm2;
  Linear fc1, fc2;
  std::size_t heads = 1;
  std::size_t sr_ratio = 1;
  double drop_path = 0.0;

  std::size_t dim() const { return norm1.gamma.dim(0); }
  void visit(const std::string& prefix, const ParamVisitor& fn) const;
};

struct EncoderStage {
  Linear embed;  // [patch*patch*in_channels x dim]
  LayerNormParams embed_norm;
  std::vector<TransformerBlock> blocks;
  LayerNormParams norm;
  std::size_t patch_size = 0;
  std::size_t stride = 0;

  void visit(const std::string& prefix, const ParamVisitor& fn) const;
};

struct EncoderParams {
  std::vector<EncoderStage> stages;

  void visit(const std::string& prefix, const ParamVisitor& fn) const;
  /// Frozen tensors do not require gradients.
  void set_frozen(bool frozen) const;
  bool frozen() const;
  EncoderParams clone() const;
};

/// Truncated-normal (std 0.02) weights, zero biases, unit LayerNorm gains.
EncoderParams init_encoder(const EncoderConfig& config, Rng& rng);

/// Overlapping strided patch projection followed by LayerNorm.
FeatureMap patch_embed(const FeatureMap& input, const EncoderStage& stage);

/// Multi-head scaled dot-product self-attention over an h x w token grid.
/// Keys and values come from the grid reduced by `sr_ratio` when it is > 1.
Tensor attention_forward(const Tensor& x, std::size_t height, std::size_t width,
                         const AttentionParams& params, std::size_t heads, std::size_t sr_ratio);

/// First half of a block: LN1(x) and z_attn = x + DropPath(Attn(LN1(x))).
struct AttentionHalf {
  Tensor normed;
  Tensor z;
};
AttentionHalf attention_half(const Tensor& x, std::size_t height, std::size_t width,
                             const TransformerBlock& block, const ForwardContext& ctx);

/// Second half: LN2(z_attn) and z_mlp = z_attn + DropPath(MLP(LN2(z_attn))).
struct MlpHalf {
  Tensor normed;
  Tensor z;
};
MlpHalf mlp_half(const Tensor& z_attn, const TransformerBlock& block, const ForwardContext& ctx);

struct BlockOutput {
  Tensor z_attn;
  Tensor z_mlp;
};
BlockOutput block_forward(const Tensor& x, std::size_t height, std::size_t width,
                          const TransformerBlock& block, const ForwardContext& ctx);

/// Residual-branch stochastic depth for an unbatched [tokens x d] branch: the
/// whole branch is one batch element.
Tensor residual_drop_path(const Tensor& branch, double p, const ForwardContext& ctx);

/// Per-stage outputs (after the stage LayerNorm) for an image [C x H x W].
std::vector<FeatureMap> encoder_forward(const Tensor& image, const EncoderConfig& config,
                                        const EncoderParams& params, const ForwardContext& ctx);

/// Throws DimensionError unless H and W are multiples of the total stride.
void check_input_extent(const EncoderConfig& config, std::size_t height, std::size_t width);

}  // namespace stitchfusion
