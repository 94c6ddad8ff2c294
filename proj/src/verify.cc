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

#include "stitchfusion/verify.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "stitchfusion/adapter.h"
#include "stitchfusion/fusion_head.h"
#include "stitchfusion/ops.h"
#include "stitchfusion/stitch.h"
#include "stitchfusion/train.h"

namespace stitchfusion {

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double std = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = std * rng.normal();
  return Tensor::from_data(shape, std::move(v));
}

// Random linear functional of t, so no gradient cancels by symmetry.
Tensor project(const Tensor& t, const Tensor& weights) { return sum(mul(t, weights)); }

void jitter(const Tensor& t, Rng& rng, double std) {
  Tensor handle = t;
  for (double& x : handle.mutable_data()) x += std * rng.normal();
}

// `base` followed by every tensor `visit` reports.
std::vector<Tensor> with(std::vector<Tensor> base, const std::function<void(const ParamVisitor&)>& visit) {
  visit([&](const std::string&, const Tensor& t) { base.push_back(t); });
  return base;
}

// Large block tensors are probed at a seeded sample of coordinates.
constexpr std::size_t kBlockCoordsPerTensor = 200;

using CaseFn = std::function<GradCheckReport(std::uint64_t seed, std::size_t coords)>;

GradCheckReport unary(std::uint64_t seed, const Shape& shape, const std::function<Tensor(const Tensor&)>& op,
                      const Shape& out_shape) {
  Rng rng = Rng::derive(seed, 1);
  Tensor x = random_tensor(shape, rng);
  Tensor w = random_tensor(out_shape, rng);
  return grad_check([&] { return project(op(x), w); }, {x});
}

GradCheckReport binary(std::uint64_t seed, const Shape& sa, const Shape& sb,
                       const std::function<Tensor(const Tensor&, const Tensor&)>& op, const Shape& out_shape) {
  Rng rng = Rng::derive(seed, 2);
  Tensor a = random_tensor(sa, rng);
  Tensor b = random_tensor(sb, rng);
  Tensor w = random_tensor(out_shape, rng);
  return grad_check([&] { return project(op(a, b), w); }, {a, b});
}

GradCheckReport attention_case(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 3);
  const std::size_t d = 8, h = 4, w = 4, heads = 2, sr = 2;
  AttentionParams p;
  p.q = Linear::truncated_normal(d, d, rng, 0.4);
  p.k = Linear::truncated_normal(d, d, rng, 0.4);
  p.v = Linear::truncated_normal(d, d, rng, 0.4);
  p.proj = Linear::truncated_normal(d, d, rng, 0.4);
  p.sr = Linear::truncated_normal(sr * sr * d, d, rng, 0.2);
  p.sr_norm = LayerNormParams::identity(d);
  for (const Linear* l : {&p.q, &p.k, &p.v, &p.proj, &p.sr}) jitter(l->bias, rng, 0.1);
  jitter(p.sr_norm.gamma, rng, 0.1);
  jitter(p.sr_norm.beta, rng, 0.1);
  Tensor x = random_tensor({h * w, d}, rng);
  Tensor proj = random_tensor({h * w, d}, rng);
  auto inputs = with({x}, [&](const ParamVisitor& fn) { p.visit("attn", fn); });
  return grad_check([&] { return project(attention_forward(x, h, w, p, heads, sr), proj); }, inputs);
}

GradCheckReport ffm_case(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 4);
  FfmStage stage{scaled_linear(8, 4, rng), scaled_linear(4, 4, rng)};
  jitter(stage.fuse.bias, rng, 0.1);
  jitter(stage.out.bias, rng, 0.1);
  Tensor a = random_tensor({6, 4}, rng);
  Tensor b = random_tensor({6, 4}, rng);
  Tensor proj = random_tensor({6, 4}, rng);
  std::vector<Tensor> inputs{a, b};
  stage.fuse.visit("fuse", [&](const std::string&, const Tensor& t) { inputs.push_back(t); });
  stage.out.visit("out", [&](const std::string&, const Tensor& t) { inputs.push_back(t); });
  return grad_check([&] { return project(modal_merge({a, b}, &stage), proj); }, inputs);
}

GradCheckReport decoder_case(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 5);
  DecoderParams dec = DecoderParams::init({4, 6}, 5, 3, rng);
  std::vector<FeatureMap> pyramid{FeatureMap{random_tensor({16, 4}, rng), 4, 4},
                                  FeatureMap{random_tensor({4, 6}, rng), 2, 2}};
  Tensor proj = random_tensor({3, 4, 4}, rng);
  auto inputs = with({pyramid[0].tokens, pyramid[1].tokens},
                     [&](const ParamVisitor& fn) { dec.visit("decoder", fn); });
  return grad_check([&] { return project(decode_forward(pyramid, dec), proj); }, inputs);
}

MultiAdapter live_adapter(std::size_t dim, std::size_t rank, Rng& rng, double dropout) {
  MultiAdapter a = MultiAdapter::init(dim, rank, rng, dropout);
  jitter(a.w_down, rng, 0.3);
  jitter(a.w_mid, rng, 0.3);
  jitter(a.w_up, rng, 0.3);
  jitter(a.b_down, rng, 0.1);
  jitter(a.b_mid, rng, 0.1);
  jitter(a.b_up, rng, 0.1);
  return a;
}

GradCheckReport adapter_case(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 6);
  MultiAdapter ada = live_adapter(8, 4, rng, 0.25);
  Tensor x = random_tensor({10, 8}, rng);
  Tensor proj = random_tensor({10, 8}, rng);
  auto inputs = with({x}, [&](const ParamVisitor& fn) { ada.visit("adapter", fn); });
  return grad_check(
      [&] {
        Rng masks = Rng::derive(seed, 60);
        const ForwardContext ctx{Mode::kTrain, &masks};
        return project(adapter_forward(x, ada, ctx), proj);
      },
      inputs);
}

GradCheckReport stitched_block_case(std::uint64_t seed) {
  // Alternates modality count and density across seeds.
  const std::size_t m = 2 + seed % 2;
  const Density variants[] = {Density::kPairBidirectional, Density::kShared, Density::kPairTwoUnidirectional};
  const Density density = variants[seed % 3];
  EncoderConfig cfg = EncoderConfig::tiny();
  Rng rng = Rng::derive(seed, 7);
  std::vector<EncoderParams> encoders;
  std::vector<const TransformerBlock*> blocks;
  for (std::size_t i = 0; i < m; ++i) encoders.push_back(init_encoder(cfg, rng));
  for (auto& enc : encoders) {
    TransformerBlock& b = enc.stages[0].blocks[0];
    b.drop_path = 0.2;
    b.visit("b", [&](const std::string&, const Tensor& t) { jitter(t, rng, 0.05); });
    blocks.push_back(&b);
  }
  AdapterBank bank = build_adapter_bank(m, cfg, DensityConfig{density, {0}}, 4, seed, 0.1);
  for (auto& [key, ada] : bank.entries()) {
    ada.visit("a", [&](const std::string&, const Tensor& t) { jitter(t, rng, 0.2); });
  }
  const std::size_t h = 8, w = 8, d = cfg.stages[0].dim;
  std::vector<Tensor> xs, projs;
  for (std::size_t i = 0; i < m; ++i) {
    xs.push_back(random_tensor({h * w, d}, rng));
    projs.push_back(random_tensor({h * w, d}, rng));
  }
  std::vector<Tensor> inputs = xs;
  for (const TransformerBlock* b : blocks)
    b->visit("b", [&](const std::string&, const Tensor& t) { inputs.push_back(t); });
  for (const auto& [key, ada] : bank.entries()) {
    if (key.stage == 0 && key.block == 0)
      ada.visit("a", [&](const std::string&, const Tensor& t) { inputs.push_back(t); });
  }
  return grad_check(
      [&] {
        Rng masks = Rng::derive(seed, 70);
        const ForwardContext ctx{Mode::kTrain, &masks};
        auto out = stitch_block_forward(xs, h, w, blocks, bank, 0, 0, ctx);
        Tensor total = project(out[0], projs[0]);
        for (std::size_t i = 1; i < m; ++i) total = add(total, project(out[i], projs[i]));
        return total;
      },
      inputs, kGradCheckStep, kBlockCoordsPerTensor, seed);
}

GradCheckReport end_to_end_case(std::uint64_t seed, std::size_t coords) {
  ModelConfig cfg;
  cfg.encoder = EncoderConfig::tiny();
  cfg.encoder.drop_path_rate = 0.1;
  cfg.modalities = {"a", "b"};
  cfg.num_classes = 4;
  cfg.use_ffm = seed % 2 == 1;
  StitchModel model = build_model(cfg, seed);
  Rng rng = Rng::derive(seed, 8);
  perturb_up_projections(model.bank, rng, 0.05);
  const std::size_t h = 32, w = 32;
  std::vector<Tensor> images;
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> v(3 * h * w);
    for (double& x : v) x = rng.uniform();
    images.push_back(Tensor::from_data({3, h, w}, std::move(v)));
  }
  std::vector<std::uint16_t> labels(h * w);
  for (auto& l : labels) l = static_cast<std::uint16_t>(rng.uniform_int(0, 3));
  for (std::size_t i = 0; i < labels.size(); i += 17) labels[i] = kIgnoreIndex;
  return grad_check(
      [&] {
        Rng masks = Rng::derive(seed, 80);
        const ForwardContext ctx{Mode::kTrain, &masks};
        return cross_entropy(predict_logits(model, images, ctx, h, w), labels);
      },
      model.trainable_parameters(), kGradCheckStep, coords, seed);
}

const std::vector<std::pair<std::string, CaseFn>>& registry() {
  static const std::vector<std::pair<std::string, CaseFn>> cases = [] {
    std::vector<std::pair<std::string, CaseFn>> r;
    auto add_case = [&](const std::string& name, CaseFn fn) { r.emplace_back(name, std::move(fn)); };
    add_case("matmul", [](std::uint64_t s, std::size_t) {
      return binary(s, {3, 4}, {4, 2}, [](const Tensor& a, const Tensor& b) { return matmul(a, b); }, {3, 2});
    });
    add_case("transpose", [](std::uint64_t s, std::size_t) {
      return unary(s, {3, 5}, [](const Tensor& x) { return transpose(x); }, {5, 3});
    });
    add_case("reshape", [](std::uint64_t s, std::size_t) {
      return unary(s, {4, 6}, [](const Tensor& x) { return reshape(x, {2, 3, 4}); }, {2, 3, 4});
    });
    add_case("add", [](std::uint64_t s, std::size_t) {
      return binary(s, {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return add(a, b); }, {3, 4});
    });
    add_case("sub", [](std::uint64_t s, std::size_t) {
      return binary(s, {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return sub(a, b); }, {3, 4});
    });
    add_case("mul", [](std::uint64_t s, std::size_t) {
      return binary(s, {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return mul(a, b); }, {3, 4});
    });
    add_case("scale", [](std::uint64_t s, std::size_t) {
      return unary(s, {3, 4}, [](const Tensor& x) { return scale(x, -1.7); }, {3, 4});
    });
    add_case("add_scalar", [](std::uint64_t s, std::size_t) {
      return unary(s, {3, 4}, [](const Tensor& x) { return add_scalar(x, 0.3); }, {3, 4});
    });
    add_case("add_bias", [](std::uint64_t s, std::size_t) {
      return binary(s, {2, 3}, {3}, [](const Tensor& a, const Tensor& b) { return add_bias(a, b); }, {2, 3});
    });
    add_case("mean_of", [](std::uint64_t s, std::size_t) {
      return binary(s, {3, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) { return mean_of({a, b, a}); }, {3, 4});
    });
    add_case("sum", [](std::uint64_t s, std::size_t) {
      return unary(s, {3, 4}, [](const Tensor& x) { return sum(mul(x, x)); }, {1});
    });
    add_case("mean", [](std::uint64_t s, std::size_t) {
      return unary(s, {3, 4}, [](const Tensor& x) { return mean(mul(x, x)); }, {1});
    });
    add_case("layer_norm", [](std::uint64_t s, std::size_t) {
      Rng rng = Rng::derive(s, 9);
      Tensor x = random_tensor({5, 6}, rng);
      Tensor gamma = random_tensor({6}, rng);
      Tensor beta = random_tensor({6}, rng);
      Tensor w = random_tensor({5, 6}, rng);
      return grad_check([&] { return project(layer_norm(x, gamma, beta), w); }, {x, gamma, beta});
    });
    add_case("softmax", [](std::uint64_t s, std::size_t) {
      return unary(s, {4, 5}, [](const Tensor& x) { return softmax(x); }, {4, 5});
    });
    add_case("gelu", [](std::uint64_t s, std::size_t) {
      return unary(s, {4, 5}, [](const Tensor& x) { return gelu(scale(x, 2.0)); }, {4, 5});
    });
    add_case("dropout", [](std::uint64_t s, std::size_t) {
      return unary(
          s, {4, 6},
          [s](const Tensor& x) {
            Rng masks = Rng::derive(s, 10);
            return dropout(x, 0.3, ForwardContext{Mode::kTrain, &masks});
          },
          {4, 6});
    });
    add_case("drop_path", [](std::uint64_t s, std::size_t) {
      return unary(
          s, {5, 4},
          [s](const Tensor& x) {
            Rng masks = Rng::derive(s, 11);
            return drop_path(x, 0.4, ForwardContext{Mode::kTrain, &masks});
          },
          {5, 4});
    });
    add_case("concat_cols", [](std::uint64_t s, std::size_t) {
      return binary(s, {3, 2}, {3, 4}, [](const Tensor& a, const Tensor& b) { return concat_cols({a, b}); }, {3, 6});
    });
    add_case("slice_cols", [](std::uint64_t s, std::size_t) {
      return unary(s, {3, 6}, [](const Tensor& x) { return slice_cols(x, 2, 3); }, {3, 3});
    });
    add_case("extract_patches", [](std::uint64_t s, std::size_t) {
      return unary(s, {20, 3}, [](const Tensor& x) { return extract_patches(x, 4, 5, 3, 2, 1); }, {6, 27});
    });
    add_case("upsample_bilinear", [](std::uint64_t s, std::size_t) {
      return unary(s, {2, 3, 3}, [](const Tensor& x) { return upsample_bilinear(x, 7, 5); }, {2, 7, 5});
    });
    add_case("cross_entropy", [](std::uint64_t s, std::size_t) {
      Rng rng = Rng::derive(s, 12);
      Tensor logits = random_tensor({3, 4, 4}, rng, 2.0);
      std::vector<std::uint16_t> labels(16);
      for (auto& l : labels) l = static_cast<std::uint16_t>(rng.uniform_int(0, 2));
      labels[5] = kIgnoreIndex;
      return grad_check([&] { return cross_entropy(logits, labels); }, {logits});
    });
    add_case("linear", [](std::uint64_t s, std::size_t) {
      Rng rng = Rng::derive(s, 13);
      Linear l = Linear::truncated_normal(5, 3, rng, 0.5);
      jitter(l.bias, rng, 0.5);
      Tensor x = random_tensor({4, 5}, rng);
      Tensor w = random_tensor({4, 3}, rng);
      return grad_check([&] { return project(linear(x, l), w); }, {x, l.weight, l.bias});
    });
    add_case("fan_out", [](std::uint64_t s, std::size_t) {
      return unary(s, {3, 4}, [](const Tensor& x) { return add(mul(x, x), gelu(x)); }, {3, 4});
    });
    add_case("attention", [](std::uint64_t s, std::size_t) { return attention_case(s); });
    add_case("ffm_merge", [](std::uint64_t s, std::size_t) { return ffm_case(s); });
    add_case("decoder", [](std::uint64_t s, std::size_t) { return decoder_case(s); });
    add_case("adapter", [](std::uint64_t s, std::size_t) { return adapter_case(s); });
    add_case("stitched_block", [](std::uint64_t s, std::size_t) { return stitched_block_case(s); });
    add_case("end_to_end", [](std::uint64_t s, std::size_t c) { return end_to_end_case(s, c); });
    return r;
  }();
  return cases;
}

}  // namespace

double GradSuiteResult::max_error() const {
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, c.report.max_rel_error);
  return worst;
}

bool GradSuiteResult::passed() const {
  if (cases.empty()) return false;
  for (const auto& c : cases)
    if (!(c.report.max_rel_error < tolerance) || c.report.coordinates == 0) return false;
  return true;
}

std::vector<std::string> GradSuiteResult::summary_lines() const {
  std::map<std::string, std::pair<double, std::size_t>> worst;
  std::vector<std::string> order;
  for (const auto& c : cases) {
    auto [it, fresh] = worst.emplace(c.name, std::make_pair(0.0, std::size_t{0}));
    if (fresh) order.push_back(c.name);
    it->second.first = std::max(it->second.first, c.report.max_rel_error);
    it->second.second += 1;
  }
  std::vector<std::string> lines;
  for (const auto& name : order) {
    const auto& [err, seeds] = worst[name];
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s seeds=%-3zu max_rel_err=%.3e %s", name.c_str(), seeds, err,
                  err < tolerance ? "ok" : "FAIL");
    lines.emplace_back(buf);
  }
  return lines;
}

std::vector<std::string> grad_case_names(bool include_end_to_end) {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry())
    if (include_end_to_end || name != "end_to_end") names.push_back(name);
  return names;
}

GradCase run_grad_case(const std::string& name, std::uint64_t seed, std::size_t end_to_end_coords) {
  for (const auto& [n, fn] : registry()) {
    if (n == name) return GradCase{name, seed, fn(seed, end_to_end_coords)};
  }
  throw std::invalid_argument("unknown gradient check '" + name + "'");
}

GradSuiteResult run_grad_suite(const GradSuiteOptions& options, const GradCaseCallback& on_case) {
  GradSuiteResult result;
  result.tolerance = options.tolerance;
  for (const std::string& name : grad_case_names(options.include_end_to_end)) {
    for (std::uint64_t seed : options.seeds) {
      result.cases.push_back(run_grad_case(name, seed, options.end_to_end_coords));
      if (on_case) on_case(result.cases.back());
    }
  }
  return result;
}

TransparencyReport transparency_check(std::uint64_t seed, std::size_t num_modalities) {
  const std::vector<std::vector<std::size_t>> subsets{{0}, {1}, {2}, {3}, {0, 1}, {2, 3}, {1, 3}, {0, 1, 2, 3}};
  const Density variants[] = {Density::kShared, Density::kPairBidirectional, Density::kPairTwoUnidirectional};
  TransparencyReport report;
  Rng rng = Rng::derive(seed, 0x7C);
  std::vector<Tensor> images;
  for (std::size_t i = 0; i < num_modalities; ++i) {
    std::vector<double> v(3 * 32 * 32);
    for (double& x : v) x = rng.uniform();
    images.push_back(Tensor::from_data({3, 32, 32}, std::move(v)));
  }
  const ForwardContext ctx{Mode::kEval, nullptr};
  NoGradGuard no_grad;
  for (Density density : variants) {
    for (const auto& stages : subsets) {
      ModelConfig cfg;
      for (std::size_t i = 0; i < num_modalities; ++i) cfg.modalities.push_back("m" + std::to_string(i));
      cfg.num_classes = 3;
      cfg.density = DensityConfig{density, stages};
      StitchModel model = build_model(cfg, seed);
      // Live down/mid projections so only the zero up-projection keeps adapters silent.
      for (auto& [key, ada] : model.bank.entries()) {
        jitter(ada.w_down, rng, 0.5);
        jitter(ada.w_mid, rng, 0.5);
        jitter(ada.b_down, rng, 0.5);
      }
      const auto stitched = stitched_encode(images, model, ctx);
      bool same = true;
      for (std::size_t i = 0; i < num_modalities && same; ++i) {
        const auto alone = encoder_forward(images[i], cfg.encoder, model.encoders[i], ctx);
        for (std::size_t s = 0; s < alone.size() && same; ++s)
          same = values_equal(alone[s].tokens, stitched[i][s].tokens);
      }
      ++report.configurations;
      if (same) {
        ++report.matching;
      } else {
        std::string label = density_name(density) + " stages";
        for (std::size_t s : stages) label += " " + std::to_string(s + 1);
        report.failures.push_back(label);
      }
    }
  }
  return report;
}

}  // namespace stitchfusion
