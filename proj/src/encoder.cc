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

#include "stitchfusion/encoder.h"

#include <cmath>
#include <stdexcept>

namespace stitchfusion {

namespace {

EncoderConfig make_preset(std::string name, std::size_t in_channels,
                          const std::vector<std::size_t>& dims,
                          const std::vector<std::size_t>& depths,
                          const std::vector<std::size_t>& heads,
                          const std::vector<std::size_t>& sr) {
  EncoderConfig c;
  c.preset = std::move(name);
  c.in_channels = in_channels;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    StageConfig s;
    s.dim = dims[i];
    s.depth = depths[i];
    s.heads = heads[i];
    s.patch_size = i == 0 ? 7 : 3;
    s.stride = i == 0 ? 4 : 2;
    s.sr_ratio = sr[i];
    c.stages.push_back(s);
  }
  return c;
}

}  // namespace

EncoderConfig EncoderConfig::tiny(std::size_t in_channels) {
  return make_preset("tiny", in_channels, {16, 32, 64, 128}, {2, 2, 2, 2}, {1, 2, 4, 8}, {4, 2, 1, 1});
}

EncoderConfig EncoderConfig::b2_like(std::size_t in_channels) {
  return make_preset("b2-like", in_channels, {64, 128, 320, 512}, {3, 4, 6, 3}, {1, 2, 5, 8},
                     {8, 4, 2, 1});
}

EncoderConfig EncoderConfig::from_preset(const std::string& name, std::size_t in_channels) {
  if (name == "tiny") return tiny(in_channels);
  if (name == "b2-like") return b2_like(in_channels);
  throw std::invalid_argument("unknown backbone preset '" + name + "' (expected tiny or b2-like)");
}

void EncoderConfig::validate() const {
  if (stages.empty()) throw std::invalid_argument("encoder needs at least one stage");
  if (in_channels == 0) throw std::invalid_argument("encoder in_channels must be positive");
  if (mlp_ratio == 0) throw std::invalid_argument("encoder mlp_ratio must be positive");
  if (!(drop_path_rate >= 0.0 && drop_path_rate < 1.0))
    throw std::invalid_argument("drop_path_rate must lie in [0, 1)");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageConfig& s = stages[i];
    const std::string where = "stage " + std::to_string(i + 1) + ": ";
    if (s.dim == 0 || s.depth == 0 || s.heads == 0 || s.patch_size == 0 || s.stride == 0 ||
        s.sr_ratio == 0)
      throw std::invalid_argument(where + "all extents must be positive");
    if (s.dim % s.heads != 0)
      throw std::invalid_argument(where + "dim " + std::to_string(s.dim) +
                                  " is not divisible by " + std::to_string(s.heads) + " heads");
  }
}

std::size_t EncoderConfig::total_depth() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.depth;
  return n;
}

std::size_t EncoderConfig::total_stride() const {
  std::size_t n = 1;
  for (const auto& s : stages) n *= s.stride;
  return n;
}

std::vector<std::size_t> EncoderConfig::dims() const {
  std::vector<std::size_t> out;
  for (const auto& s : stages) out.push_back(s.dim);
  return out;
}

std::vector<std::size_t> EncoderConfig::depths() const {
  std::vector<std::size_t> out;
  for (const auto& s : stages) out.push_back(s.depth);
  return out;
}

double EncoderConfig::block_drop_path(std::size_t stage, std::size_t block) const {
  const std::size_t total = total_depth();
  if (total <= 1 || drop_path_rate == 0.0) return 0.0;
  std::size_t index = block;
  for (std::size_t s = 0; s < stage; ++s) index += stages[s].depth;
  return drop_path_rate * static_cast<double>(index) / static_cast<double>(total - 1);
}

Tensor FeatureMap::to_chw() const {
  return reshape(transpose(tokens), {tokens.dim(1), height, width});
}

FeatureMap FeatureMap::from_chw(const Tensor& chw) {
  if (chw.rank() != 3) throw DimensionError("expected [C x H x W], got " + shape_to_string(chw.shape()));
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  return {transpose(reshape(chw, {c, h * w})), h, w};
}

void AttentionParams::visit(const std::string& prefix, const ParamVisitor& fn) const {
  q.visit(prefix + ".q", fn);
  k.visit(prefix + ".k", fn);
  v.visit(prefix + ".v", fn);
  proj.visit(prefix + ".proj", fn);
  if (sr.weight.defined()) {
    sr.visit(prefix + ".sr", fn);
    sr_norm.visit(prefix + ".sr_norm", fn);
  }
}

void TransformerBlock::visit(const std::string& prefix, const ParamVisitor& fn) const {
  norm1.visit(prefix + ".norm1", fn);
  attn.visit(prefix + ".attn", fn);
  norm2.visit(prefix + ".norm2", fn);
  fc1.visit(prefix + ".fc1", fn);
  fc2.visit(prefix + ".fc2", fn);
}

void EncoderStage::visit(const std::string& prefix, const ParamVisitor& fn) const {
  embed.visit(prefix + ".embed", fn);
  embed_norm.visit(prefix + ".embed_norm", fn);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    blocks[b].visit(prefix + ".block" + std::to_string(b), fn);
  norm.visit(prefix + ".norm", fn);
}

void EncoderParams::visit(const std::string& prefix, const ParamVisitor& fn) const {
  for (std::size_t s = 0; s < stages.size(); ++s)
    stages[s].visit(prefix + ".stage" + std::to_string(s), fn);
}

void EncoderParams::set_frozen(bool frozen) const {
  visit("", [frozen](const std::string&, const Tensor& t) {
    Tensor handle = t;
    handle.set_requires_grad(!frozen);
  });
}

bool EncoderParams::frozen() const {
  bool any_trainable = false;
  visit("", [&](const std::string&, const Tensor& t) { any_trainable = any_trainable || t.requires_grad(); });
  return !any_trainable;
}

EncoderParams EncoderParams::clone() const {
  EncoderParams copy = *this;
  auto clone_linear = [](Linear& l) {
    if (!l.weight.defined()) return;
    l.weight = l.weight.clone();
    l.bias = l.bias.clone();
  };
  auto clone_norm = [](LayerNormParams& n) {
    if (!n.gamma.defined()) return;
    n.gamma = n.gamma.clone();
    n.beta = n.beta.clone();
  };
  for (auto& stage : copy.stages) {
    clone_linear(stage.embed);
    clone_norm(stage.embed_norm);
    clone_norm(stage.norm);
    for (auto& b : stage.blocks) {
      clone_norm(b.norm1);
      clone_norm(b.norm2);
      clone_linear(b.attn.q);
      clone_linear(b.attn.k);
      clone_linear(b.attn.v);
      clone_linear(b.attn.proj);
      clone_linear(b.attn.sr);
      clone_norm(b.attn.sr_norm);
      clone_linear(b.fc1);
      clone_linear(b.fc2);
    }
  }
  return copy;
}

EncoderParams init_encoder(const EncoderConfig& config, Rng& rng) {
  config.validate();
  EncoderParams params;
  std::size_t in_dim = config.in_channels;
  for (std::size_t s = 0; s < config.num_stages(); ++s) {
    const StageConfig& sc = config.stages[s];
    EncoderStage stage;
    stage.patch_size = sc.patch_size;
    stage.stride = sc.stride;
    stage.embed = Linear::truncated_normal(sc.patch_size * sc.patch_size * in_dim, sc.dim, rng);
    stage.embed_norm = LayerNormParams::identity(sc.dim);
    for (std::size_t b = 0; b < sc.depth; ++b) {
      TransformerBlock block;
      block.heads = sc.heads;
      block.sr_ratio = sc.sr_ratio;
      block.drop_path = config.block_drop_path(s, b);
      block.norm1 = LayerNormParams::identity(sc.dim);
      block.attn.q = Linear::truncated_normal(sc.dim, sc.dim, rng);
      block.attn.k = Linear::truncated_normal(sc.dim, sc.dim, rng);
      block.attn.v = Linear::truncated_normal(sc.dim, sc.dim, rng);
      block.attn.proj = Linear::truncated_normal(sc.dim, sc.dim, rng);
      if (sc.sr_ratio > 1) {
        block.attn.sr = Linear::truncated_normal(sc.sr_ratio * sc.sr_ratio * sc.dim, sc.dim, rng);
        block.attn.sr_norm = LayerNormParams::identity(sc.dim);
      }
      block.norm2 = LayerNormParams::identity(sc.dim);
      block.fc1 = Linear::truncated_normal(sc.dim, sc.dim * config.mlp_ratio, rng);
      block.fc2 = Linear::truncated_normal(sc.dim * config.mlp_ratio, sc.dim, rng);
      stage.blocks.push_back(std::move(block));
    }
    stage.norm = LayerNormParams::identity(sc.dim);
    params.stages.push_back(std::move(stage));
    in_dim = sc.dim;
  }
  return params;
}

FeatureMap patch_embed(const FeatureMap& input, const EncoderStage& stage) {
  if (input.height % stage.stride != 0 || input.width % stage.stride != 0) {
    throw DimensionError("patch_embed: " + std::to_string(input.height) + "x" +
                         std::to_string(input.width) + " grid is not divisible by stride " +
                         std::to_string(stage.stride));
  }
  const std::size_t pad = stage.patch_size / 2;
  Tensor patches = extract_patches(input.tokens, input.height, input.width, stage.patch_size,
                                   stage.stride, pad);
  FeatureMap out;
  out.height = patch_output_extent(input.height, stage.patch_size, stage.stride, pad);
  out.width = patch_output_extent(input.width, stage.patch_size, stage.stride, pad);
  out.tokens = layer_norm(linear(patches, stage.embed), stage.embed_norm);
  return out;
}

Tensor attention_forward(const Tensor& x, std::size_t height, std::size_t width,
                         const AttentionParams& params, std::size_t heads, std::size_t sr_ratio) {
  if (x.rank() != 2 || x.dim(0) != height * width) {
    throw DimensionError("attention: " + shape_to_string(x.shape()) + " is not a " +
                         std::to_string(height) + "x" + std::to_string(width) + " token grid");
  }
  const std::size_t d = x.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("attention: dim " + std::to_string(d) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  Tensor kv_source = x;
  if (sr_ratio > 1) {
    if (height % sr_ratio != 0 || width % sr_ratio != 0) {
      throw DimensionError("attention: grid " + std::to_string(height) + "x" + std::to_string(width) +
                           " not divisible by reduction ratio " + std::to_string(sr_ratio));
    }
    Tensor reduced = extract_patches(x, height, width, sr_ratio, sr_ratio, 0);
    kv_source = layer_norm(linear(reduced, params.sr), params.sr_norm);
  }
  const Tensor q = linear(x, params.q);
  const Tensor k = linear(kv_source, params.k);
  const Tensor v = linear(kv_source, params.v);
  const std::size_t head_dim = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = heads == 1 ? q : slice_cols(q, h * head_dim, head_dim);
    Tensor kh = heads == 1 ? k : slice_cols(k, h * head_dim, head_dim);
    Tensor vh = heads == 1 ? v : slice_cols(v, h * head_dim, head_dim);
    Tensor weights = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
    outputs.push_back(matmul(weights, vh));
  }
  Tensor merged = heads == 1 ? outputs.front() : concat_cols(outputs);
  return linear(merged, params.proj);
}

Tensor residual_drop_path(const Tensor& branch, double p, const ForwardContext& ctx) {
  if (!ctx.training() || p == 0.0) return branch;
  const Shape shape = branch.shape();
  return reshape(drop_path(reshape(branch, {1, branch.numel()}), p, ctx), shape);
}

AttentionHalf attention_half(const Tensor& x, std::size_t height, std::size_t width,
                             const TransformerBlock& block, const ForwardContext& ctx) {
  if (x.rank() != 2 || x.dim(1) != block.dim()) {
    throw DimensionError("block: input " + shape_to_string(x.shape()) + " does not match block dim " +
                         std::to_string(block.dim()));
  }
  AttentionHalf out;
  out.normed = layer_norm(x, block.norm1);
  Tensor branch = attention_forward(out.normed, height, width, block.attn, block.heads, block.sr_ratio);
  out.z = add(x, residual_drop_path(branch, block.drop_path, ctx));
  return out;
}

MlpHalf mlp_half(const Tensor& z_attn, const TransformerBlock& block, const ForwardContext& ctx) {
  MlpHalf out;
  out.normed = layer_norm(z_attn, block.norm2);
  Tensor branch = linear(gelu(linear(out.normed, block.fc1)), block.fc2);
  out.z = add(z_attn, residual_drop_path(branch, block.drop_path, ctx));
  return out;
}

BlockOutput block_forward(const Tensor& x, std::size_t height, std::size_t width,
                          const TransformerBlock& block, const ForwardContext& ctx) {
  AttentionHalf a = attention_half(x, height, width, block, ctx);
  MlpHalf m = mlp_half(a.z, block, ctx);
  return {a.z, m.z};
}

void check_input_extent(const EncoderConfig& config, std::size_t height, std::size_t width) {
  const std::size_t stride = config.total_stride();
  if (height % stride != 0 || width % stride != 0) {
    throw DimensionError("input " + std::to_string(height) + "x" + std::to_string(width) +
                         " is not divisible by the total stride " + std::to_string(stride));
  }
}

std::vector<FeatureMap> encoder_forward(const Tensor& image, const EncoderConfig& config,
                                        const EncoderParams& params, const ForwardContext& ctx) {
  if (image.rank() != 3 || image.dim(0) != config.in_channels) {
    throw DimensionError("encoder: expected [" + std::to_string(config.in_channels) +
                         " x H x W] image, got " + shape_to_string(image.shape()));
  }
  check_input_extent(config, image.dim(1), image.dim(2));
  std::vector<FeatureMap> outputs;
  FeatureMap current = FeatureMap::from_chw(image);
  for (const EncoderStage& stage : params.stages) {
    FeatureMap grid = patch_embed(current, stage);
    Tensor x = grid.tokens;
    for (const TransformerBlock& block : stage.blocks)
      x = block_forward(x, grid.height, grid.width, block, ctx).z_mlp;
    grid.tokens = layer_norm(x, stage.norm);
    outputs.push_back(grid);
    current = grid;
  }
  return outputs;
}

}  // namespace stitchfusion
