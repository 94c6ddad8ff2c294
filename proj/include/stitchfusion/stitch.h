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
#include <optional>
#include <string>
#include <vector>

#include "stitchfusion/adapter.h"
#include "stitchfusion/encoder.h"
#include "stitchfusion/fusion_head.h"
#include "stitchfusion/ops.h"

namespace stitchfusion {

/// One block of M modality streams exchanging information through adapters.
///
/// z_attn_i = x_i + DropPath(Attn_i(LN1_i(x_i)))
/// z_attn_j += sum_{i != j} DropPath(Ada1_{i->j}(LN1_i(x_i)))
/// z_mlp_i  = z_attn_i + DropPath(MLP_i(LN2_i(z_attn_i)))
/// z_mlp_j  += sum_{i != j} DropPath(Ada2_{i->j}(LN2_i(z_attn_i)))
///
/// All cross-modal terms of one step are computed from values taken before
/// any of them is added, and for each target the terms are summed in source
/// order before being added to the residual stream.
std::vector<Tensor> stitch_block_forward(const std::vector<Tensor>& xs, std::size_t height,
                                         std::size_t width,
                                         const std::vector<const TransformerBlock*>& blocks,
                                         const AdapterBank& bank, std::size_t stage,
                                         std::size_t block, const ForwardContext& ctx);

struct ModelConfig {
  EncoderConfig encoder = EncoderConfig::tiny();
  std::vector<std::string> modalities;
  /// false builds plain per-modality encoders without adapters; used for the
  /// single-modality baselines (the only case where one modality is allowed).
  bool stitched = true;
  DensityConfig density{Density::kPairBidirectional, {0, 1, 2, 3}};
  std::size_t rank = kDefaultAdapterRank;
  double adapter_dropout = kDefaultAdapterDropout;
  bool use_ffm = false;
  std::size_t decoder_dim = kTinyDecoderDim;
  std::size_t num_classes = 0;

  std::size_t num_modalities() const { return modalities.size(); }
  void validate() const;
};

/// M frozen encoders + adapter bank + optional FFM + decode head.
struct StitchModel {
  ModelConfig config;
  /// Seed the parameters were initialized from.
  std::uint64_t seed = 0;
  std::vector<EncoderParams> encoders;
  AdapterBank bank;
  std::optional<FfmParams> ffm;
  DecoderParams decoder;

  std::size_t num_modalities() const { return encoders.size(); }

  /// Every parameter, in a fixed order: encoders, adapters, ffm, decoder.
  void visit(const ParamVisitor& fn) const;
  void visit_encoders(const ParamVisitor& fn) const;
  void visit_adapters(const ParamVisitor& fn) const;
  /// Adapters, FFM and decoder.
  void visit_trainable(const ParamVisitor& fn) const;
  std::vector<Tensor> trainable_parameters() const;
};

/// Encoders frozen, adapters/FFM/decoder trainable. Deterministic in seed.
StitchModel build_model(const ModelConfig& config, std::uint64_t seed);

/// Per-modality stage pyramids. Blocks of inactive stages run unstitched.
std::vector<std::vector<FeatureMap>> stitched_encode(const std::vector<Tensor>& images,
                                                     const StitchModel& model,
                                                     const ForwardContext& ctx);

/// Logits [num_classes x H/4 x W/4].
Tensor model_forward(const std::vector<Tensor>& images, const StitchModel& model,
                     const ForwardContext& ctx);

/// Fills every W_up/b_up with truncated-normal noise so adapters contribute.
void perturb_up_projections(AdapterBank& bank, Rng& rng, double std = kInitStd);

struct EquivalenceReport {
  std::size_t inputs = 0;
  bool shared_matches_pair_bi = false;      // M = 2
  bool tied_two_uni_matches_pair_bi = false;  // M = 2
  bool three_modalities_differ = false;     // M = 3, independent pairs vs shared
  double three_modalities_max_diff = 0.0;

  bool passed() const {
    return shared_matches_pair_bi && tied_two_uni_matches_pair_bi && three_modalities_differ;
  }
  std::string summary() const;
};

/// Shared vs pair-bidirectional equivalence for two modalities on the tiny
/// preset, plus the counter-example for three modalities.
EquivalenceReport equivalence_check(std::uint64_t seed, std::size_t num_inputs = 10);

}  // namespace stitchfusion
