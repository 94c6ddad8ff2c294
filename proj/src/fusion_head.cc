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

#include "stitchfusion/fusion_head.h"

#include <cmath>
#include <stdexcept>

#include "stitchfusion/ops.h"

namespace stitchfusion {

Linear scaled_linear(std::size_t in, std::size_t out, Rng& rng) {
  return Linear::truncated_normal(in, out, rng, 1.0 / std::sqrt(static_cast<double>(in)));
}

FfmParams FfmParams::init(std::size_t num_modalities, const std::vector<std::size_t>& dims, Rng& rng) {
  FfmParams p;
  for (std::size_t d : dims) {
    p.stages.push_back({scaled_linear(num_modalities * d, d, rng), scaled_linear(d, d, rng)});
  }
  return p;
}

void FfmParams::visit(const std::string& prefix, const ParamVisitor& fn) const {
  for (std::size_t s = 0; s < stages.size(); ++s) {
    stages[s].fuse.visit(prefix + ".stage" + std::to_string(s) + ".fuse", fn);
    stages[s].out.visit(prefix + ".stage" + std::to_string(s) + ".out", fn);
  }
}

Tensor modal_merge(const std::vector<Tensor>& features, const FfmStage* ffm) {
  if (features.empty()) throw std::invalid_argument("modal_merge: no features");
  for (const Tensor& f : features) {
    if (f.shape() != features.front().shape()) {
      throw DimensionError("modal_merge: feature shapes differ, " +
                           shape_to_string(features.front().shape()) + " vs " + shape_to_string(f.shape()));
    }
  }
  if (ffm == nullptr) return mean_of(features);
  Tensor stacked = features.size() == 1 ? features.front() : concat_cols(features);
  return linear(gelu(linear(stacked, ffm->fuse)), ffm->out);
}

DecoderParams DecoderParams::init(const std::vector<std::size_t>& dims, std::size_t decoder_dim,
                                  std::size_t num_classes, Rng& rng) {
  if (decoder_dim == 0 || num_classes == 0) throw std::invalid_argument("decoder extents must be positive");
  DecoderParams p;
  for (std::size_t d : dims) p.stage_proj.push_back(scaled_linear(d, decoder_dim, rng));
  p.fuse = scaled_linear(dims.size() * decoder_dim, decoder_dim, rng);
  p.classifier = scaled_linear(decoder_dim, num_classes, rng);
  return p;
}

void DecoderParams::visit(const std::string& prefix, const ParamVisitor& fn) const {
  for (std::size_t s = 0; s < stage_proj.size(); ++s)
    stage_proj[s].visit(prefix + ".proj" + std::to_string(s), fn);
  fuse.visit(prefix + ".fuse", fn);
  classifier.visit(prefix + ".classifier", fn);
}

Tensor decode_forward(const std::vector<FeatureMap>& pyramid, const DecoderParams& decoder) {
  if (pyramid.size() != decoder.stage_proj.size()) {
    throw DimensionError("decoder: got " + std::to_string(pyramid.size()) + " stages, expected " +
                         std::to_string(decoder.stage_proj.size()));
  }
  const std::size_t h1 = pyramid.front().height;
  const std::size_t w1 = pyramid.front().width;
  std::vector<Tensor> columns;
  for (std::size_t s = 0; s < pyramid.size(); ++s) {
    const FeatureMap& f = pyramid[s];
    if (f.channels() != decoder.stage_proj[s].in_features()) {
      throw DimensionError("decoder: stage " + std::to_string(s + 1) + " has " +
                           std::to_string(f.channels()) + " channels, expected " +
                           std::to_string(decoder.stage_proj[s].in_features()));
    }
    FeatureMap projected{linear(f.tokens, decoder.stage_proj[s]), f.height, f.width};
    if (f.height == h1 && f.width == w1) {
      columns.push_back(projected.tokens);
    } else {
      Tensor up = upsample_bilinear(projected.to_chw(), h1, w1);
      columns.push_back(FeatureMap::from_chw(up).tokens);
    }
  }
  Tensor fused = gelu(linear(concat_cols(columns), decoder.fuse));
  Tensor logits = linear(fused, decoder.classifier);  // [h1*w1 x K]
  return FeatureMap{logits, h1, w1}.to_chw();
}

std::vector<std::uint16_t> argmax_labels(const Tensor& logits) {
  if (logits.rank() != 3) throw DimensionError("argmax_labels: expected [K x H x W]");
  const std::size_t k = logits.dim(0), hw = logits.dim(1) * logits.dim(2);
  auto v = logits.data();
  std::vector<std::uint16_t> out(hw, 0);
  for (std::size_t p = 0; p < hw; ++p) {
    double best = v[p];
    std::uint16_t arg = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (v[c * hw + p] > best) {
        best = v[c * hw + p];
        arg = static_cast<std::uint16_t>(c);
      }
    }
    out[p] = arg;
  }
  return out;
}

}  // namespace stitchfusion
