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

#include "stitchfusion/stitch.h"

#include <cstring>
#include <sstream>
#include <stdexcept>

namespace stitchfusion {

namespace {

// sum_{i != target} branch(i), accumulated in increasing i.
template <typename Fn>
Tensor cross_modal_sum(std::size_t num_modalities, std::size_t target, Fn&& branch) {
  Tensor acc;
  for (std::size_t i = 0; i < num_modalities; ++i) {
    if (i == target) continue;
    Tensor term = branch(i);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

bool pyramids_bit_equal(const std::vector<std::vector<FeatureMap>>& a,
                        const std::vector<std::vector<FeatureMap>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t m = 0; m < a.size(); ++m) {
    if (a[m].size() != b[m].size()) return false;
    for (std::size_t s = 0; s < a[m].size(); ++s)
      if (!bit_equal(a[m][s].tokens, b[m][s].tokens)) return false;
  }
  return true;
}

double pyramids_max_diff(const std::vector<std::vector<FeatureMap>>& a,
                         const std::vector<std::vector<FeatureMap>>& b) {
  double d = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m)
    for (std::size_t s = 0; s < a[m].size(); ++s)
      d = std::max(d, max_abs_diff(a[m][s].tokens, b[m][s].tokens));
  return d;
}

}  // namespace

std::vector<Tensor> stitch_block_forward(const std::vector<Tensor>& xs, std::size_t height,
                                         std::size_t width,
                                         const std::vector<const TransformerBlock*>& blocks,
                                         const AdapterBank& bank, std::size_t stage,
                                         std::size_t block, const ForwardContext& ctx) {
  const std::size_t m = xs.size();
  if (blocks.size() != m) throw std::invalid_argument("stitch_block_forward: one block per modality required");
  if (m != bank.num_modalities()) {
    throw std::invalid_argument("stitch_block_forward: bank routes " + std::to_string(bank.num_modalities()) +
                                " modalities, got " + std::to_string(m));
  }
  for (const Tensor& x : xs) {
    if (x.shape() != xs.front().shape()) {
      throw DimensionError("stitch_block_forward: modality shapes differ, " +
                           shape_to_string(xs.front().shape()) + " vs " + shape_to_string(x.shape()));
    }
  }

  std::vector<AttentionHalf> attn(m);
  for (std::size_t i = 0; i < m; ++i) attn[i] = attention_half(xs[i], height, width, *blocks[i], ctx);

  std::vector<Tensor> z_attn(m);
  for (std::size_t j = 0; j < m; ++j) {
    Tensor incoming = cross_modal_sum(m, j, [&](std::size_t i) {
      const MultiAdapter& ada = bank.route(stage, block, AdapterPosition::kAttn, i, j);
      return residual_drop_path(adapter_forward(attn[i].normed, ada, ctx), blocks[j]->drop_path, ctx);
    });
    z_attn[j] = add(attn[j].z, incoming);
  }

  std::vector<MlpHalf> mlp(m);
  for (std::size_t i = 0; i < m; ++i) mlp[i] = mlp_half(z_attn[i], *blocks[i], ctx);

  std::vector<Tensor> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    Tensor incoming = cross_modal_sum(m, j, [&](std::size_t i) {
      const MultiAdapter& ada = bank.route(stage, block, AdapterPosition::kMlp, i, j);
      return residual_drop_path(adapter_forward(mlp[i].normed, ada, ctx), blocks[j]->drop_path, ctx);
    });
    out[j] = add(mlp[j].z, incoming);
  }
  return out;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (num_classes < 2) throw std::invalid_argument("num_classes must be at least 2");
  if (modalities.empty()) throw std::invalid_argument("at least one modality is required");
  if (stitched) {
    if (modalities.size() < 2)
      throw std::invalid_argument("a stitched model needs at least 2 modalities, got " +
                                  std::to_string(modalities.size()));
    if (rank == 0) throw std::invalid_argument("adapter rank must be at least 1");
    density.validate(encoder.num_stages());
  }
  if (decoder_dim == 0) throw std::invalid_argument("decoder_dim must be positive");
}

void StitchModel::visit_encoders(const ParamVisitor& fn) const {
  for (std::size_t m = 0; m < encoders.size(); ++m)
    encoders[m].visit("encoder." + config.modalities[m], fn);
}

void StitchModel::visit_adapters(const ParamVisitor& fn) const { bank.visit("adapter", fn); }

void StitchModel::visit_trainable(const ParamVisitor& fn) const {
  visit_adapters(fn);
  if (ffm) ffm->visit("ffm", fn);
  decoder.visit("decoder", fn);
}

void StitchModel::visit(const ParamVisitor& fn) const {
  visit_encoders(fn);
  visit_trainable(fn);
}

std::vector<Tensor> StitchModel::trainable_parameters() const {
  std::vector<Tensor> out;
  visit_trainable([&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

StitchModel build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  StitchModel model;
  model.config = config;
  model.seed = seed;
  for (std::size_t m = 0; m < config.num_modalities(); ++m) {
    Rng rng = Rng::derive(seed, 0x100 + m);
    EncoderParams enc = init_encoder(config.encoder, rng);
    enc.set_frozen(true);
    model.encoders.push_back(std::move(enc));
  }
  if (config.stitched) {
    model.bank = build_adapter_bank(config.num_modalities(), config.encoder, config.density, config.rank,
                                    Rng::derive(seed, 0x200).next_u64(), config.adapter_dropout);
  } else {
    model.bank = AdapterBank(config.density.variant, config.num_modalities());
  }
  if (config.use_ffm) {
    Rng rng = Rng::derive(seed, 0x300);
    model.ffm = FfmParams::init(config.num_modalities(), config.encoder.dims(), rng);
  }
  Rng rng = Rng::derive(seed, 0x400);
  model.decoder = DecoderParams::init(config.encoder.dims(), config.decoder_dim, config.num_classes, rng);
  return model;
}

std::vector<std::vector<FeatureMap>> stitched_encode(const std::vector<Tensor>& images,
                                                     const StitchModel& model,
                                                     const ForwardContext& ctx) {
  const std::size_t m = model.num_modalities();
  if (images.size() != m) {
    throw std::invalid_argument("expected " + std::to_string(m) + " modality images, got " +
                                std::to_string(images.size()));
  }
  const EncoderConfig& cfg = model.config.encoder;
  for (const Tensor& img : images) {
    if (img.rank() != 3 || img.dim(0) != cfg.in_channels || img.dim(1) != images[0].dim(1) ||
        img.dim(2) != images[0].dim(2)) {
      throw DimensionError("modality images must all be [" + std::to_string(cfg.in_channels) +
                           " x H x W] with equal H, W; got " + shape_to_string(img.shape()));
    }
  }
  check_input_extent(cfg, images[0].dim(1), images[0].dim(2));

  std::vector<std::vector<FeatureMap>> pyramids(m);
  std::vector<FeatureMap> current(m);
  for (std::size_t i = 0; i < m; ++i) current[i] = FeatureMap::from_chw(images[i]);

  for (std::size_t s = 0; s < cfg.num_stages(); ++s) {
    std::vector<Tensor> xs(m);
    std::size_t h = 0, w = 0;
    for (std::size_t i = 0; i < m; ++i) {
      FeatureMap grid = patch_embed(current[i], model.encoders[i].stages[s]);
      xs[i] = grid.tokens;
      h = grid.height;
      w = grid.width;
    }
    const bool stitched = model.config.stitched && model.config.density.is_active(s);
    for (std::size_t b = 0; b < cfg.stages[s].depth; ++b) {
      if (stitched) {
        std::vector<const TransformerBlock*> blocks(m);
        for (std::size_t i = 0; i < m; ++i) blocks[i] = &model.encoders[i].stages[s].blocks[b];
        xs = stitch_block_forward(xs, h, w, blocks, model.bank, s, b, ctx);
      } else {
        for (std::size_t i = 0; i < m; ++i)
          xs[i] = block_forward(xs[i], h, w, model.encoders[i].stages[s].blocks[b], ctx).z_mlp;
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      current[i] = FeatureMap{layer_norm(xs[i], model.encoders[i].stages[s].norm), h, w};
      pyramids[i].push_back(current[i]);
    }
  }
  return pyramids;
}

Tensor model_forward(const std::vector<Tensor>& images, const StitchModel& model,
                     const ForwardContext& ctx) {
  auto pyramids = stitched_encode(images, model, ctx);
  const std::size_t stages = model.config.encoder.num_stages();
  std::vector<FeatureMap> merged;
  for (std::size_t s = 0; s < stages; ++s) {
    std::vector<Tensor> feats;
    for (const auto& p : pyramids) feats.push_back(p[s].tokens);
    const FfmStage* ffm = model.ffm ? &model.ffm->stages[s] : nullptr;
    merged.push_back({modal_merge(feats, ffm), pyramids[0][s].height, pyramids[0][s].width});
  }
  return decode_forward(merged, model.decoder);
}

void perturb_up_projections(AdapterBank& bank, Rng& rng, double std) {
  for (auto& [_, a] : bank.entries()) {
    for (Tensor* t : {&a.w_up, &a.b_up})
      for (double& v : t->mutable_data()) v = rng.truncated_normal(std);
  }
}

std::string EquivalenceReport::summary() const {
  std::ostringstream os;
  os << "inputs=" << inputs << " m2_shared==pair_bi=" << (shared_matches_pair_bi ? "yes" : "no")
     << " m2_tied_two_uni==pair_bi=" << (tied_two_uni_matches_pair_bi ? "yes" : "no")
     << " m3_differs=" << (three_modalities_differ ? "yes" : "no")
     << " m3_max_abs_diff=" << three_modalities_max_diff;
  return os.str();
}

namespace {

StitchModel equivalence_model(std::size_t m, Density density, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.encoder = EncoderConfig::tiny(3);
  for (std::size_t i = 0; i < m; ++i) cfg.modalities.push_back("m" + std::to_string(i));
  cfg.density = {density, {0, 1, 2, 3}};
  cfg.num_classes = 3;
  return build_model(cfg, seed);
}

std::vector<Tensor> random_images(std::size_t m, Rng& rng) {
  std::vector<Tensor> images;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> v(3 * 32 * 32);
    for (double& x : v) x = rng.uniform();
    images.push_back(Tensor::from_data({3, 32, 32}, std::move(v)));
  }
  return images;
}

}  // namespace

EquivalenceReport equivalence_check(std::uint64_t seed, std::size_t num_inputs) {
  NoGradGuard no_grad;
  EquivalenceReport report;
  report.inputs = num_inputs;
  const ForwardContext eval{Mode::kEval, nullptr};
  Rng rng = Rng::derive(seed, 0xE0);

  // M = 2: one weight set copied into a shared bank, a pair-bi bank and both
  // directions of a pair-two-uni bank. Encoders are common to all three.
  StitchModel shared = equivalence_model(2, Density::kShared, seed);
  perturb_up_projections(shared.bank, rng);
  StitchModel pair_bi = shared;
  pair_bi.config.density.variant = Density::kPairBidirectional;
  pair_bi.bank = AdapterBank(Density::kPairBidirectional, 2);
  StitchModel two_uni = shared;
  two_uni.config.density.variant = Density::kPairTwoUnidirectional;
  two_uni.bank = AdapterBank(Density::kPairTwoUnidirectional, 2);
  for (const auto& [key, a] : shared.bank.entries()) {
    pair_bi.bank.insert({key.stage, key.block, key.position, 0, 1}, a.clone());
    two_uni.bank.insert({key.stage, key.block, key.position, 0, 1}, a.clone());
    two_uni.bank.insert({key.stage, key.block, key.position, 1, 0}, a.clone());
  }

  // M = 3: shared bank vs independently initialized pairs.
  StitchModel shared3 = equivalence_model(3, Density::kShared, seed);
  perturb_up_projections(shared3.bank, rng);
  StitchModel pair3 = equivalence_model(3, Density::kPairBidirectional, seed);
  perturb_up_projections(pair3.bank, rng);

  report.shared_matches_pair_bi = true;
  report.tied_two_uni_matches_pair_bi = true;
  for (std::size_t n = 0; n < num_inputs; ++n) {
    auto images = random_images(2, rng);
    auto a = stitched_encode(images, shared, eval);
    auto b = stitched_encode(images, pair_bi, eval);
    auto c = stitched_encode(images, two_uni, eval);
    report.shared_matches_pair_bi = report.shared_matches_pair_bi && pyramids_bit_equal(a, b);
    report.tied_two_uni_matches_pair_bi = report.tied_two_uni_matches_pair_bi && pyramids_bit_equal(b, c);

    auto images3 = random_images(3, rng);
    const double diff =
        pyramids_max_diff(stitched_encode(images3, shared3, eval), stitched_encode(images3, pair3, eval));
    report.three_modalities_max_diff = std::max(report.three_modalities_max_diff, diff);
  }
  report.three_modalities_differ = report.three_modalities_max_diff > 0.0;
  return report;
}

}  // namespace stitchfusion
