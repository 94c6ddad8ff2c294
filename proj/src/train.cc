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

#include "stitchfusion/train.h"

#include <algorithm>
#include <cmath>

#include "autograd_internal.h"
#include "stitchfusion/ops.h"

namespace stitchfusion {

void TrainConfig::validate() const {
  if (!(base_lr >= 0.0)) throw std::invalid_argument("base_lr must be non-negative");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw std::invalid_argument("decay_factor must lie in (0, 1]");
  if (epochs == 0) throw std::invalid_argument("epochs must be at least 1");
  if (!(warmup_epochs >= 0.0) || warmup_epochs > static_cast<double>(epochs))
    throw std::invalid_argument("warmup_epochs must lie in [0, epochs]");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("adam eps must be positive");
}

double lr_at(double t, const TrainConfig& cfg) {
  const double warm = cfg.warmup_epochs;
  const double total = static_cast<double>(cfg.epochs);
  if (t < 0.0) t = 0.0;
  if (t < warm) return cfg.base_lr * t / warm;
  const double span = total - warm;
  if (span <= 0.0) return cfg.base_lr;
  const double frac = std::min(1.0, (t - warm) / span);
  return cfg.base_lr * (1.0 - (1.0 - cfg.decay_factor) * frac);
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::uint16_t> labels, std::uint16_t ignore_index) {
  if (logits.rank() != 3) throw DimensionError("cross_entropy: logits must be [K x H x W]");
  const std::size_t k = logits.dim(0);
  const std::size_t hw = logits.dim(1) * logits.dim(2);
  if (labels.size() != hw) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_to_string(logits.shape()));
  }
  auto z = logits.data();
  std::vector<double> prob(k * hw, 0.0);
  std::size_t scored = 0;
  double total = 0.0;
  for (std::size_t p = 0; p < hw; ++p) {
    const std::uint16_t label = labels[p];
    if (label == ignore_index) continue;
    if (label >= k) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(k) + ")");
    }
    double mx = z[p];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, z[c * hw + p]);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      prob[c * hw + p] = std::exp(z[c * hw + p] - mx);
      sum += prob[c * hw + p];
    }
    for (std::size_t c = 0; c < k; ++c) prob[c * hw + p] /= sum;
    total += -(z[label * hw + p] - mx - std::log(sum));
    ++scored;
  }
  const double loss = scored == 0 ? 0.0 : total / static_cast<double>(scored);
  std::vector<std::uint16_t> kept(labels.begin(), labels.end());
  return detail::make_result(
      {1}, {loss}, {&logits},
      [k, hw, scored, ignore_index, prob = std::move(prob), kept = std::move(kept)](detail::Node& self) {
        auto* g = detail::grad_sink(self, 0);
        if (g == nullptr || scored == 0) return;
        const double up = self.grad[0] / static_cast<double>(scored);
        for (std::size_t p = 0; p < hw; ++p) {
          if (kept[p] == ignore_index) continue;
          for (std::size_t c = 0; c < k; ++c) (*g)[c * hw + p] += up * prob[c * hw + p];
          (*g)[kept[p] * hw + p] -= up;
        }
      });
}

AdamW::AdamW(std::vector<Tensor> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps),
      weight_decay_(cfg.weight_decay) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++steps_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      const double update = lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * w[i]);
      if (update != 0.0) w[i] -= update;
    }
  }
}

void AdamW::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

std::vector<std::size_t> modality_map(const StitchModel& model, const Dataset& data) {
  if (data.num_classes != model.config.num_classes) {
    throw std::invalid_argument("dataset has " + std::to_string(data.num_classes) + " classes, model predicts " +
                                std::to_string(model.config.num_classes));
  }
  std::vector<std::size_t> map;
  for (const std::string& name : model.config.modalities) map.push_back(data.modality_index(name));
  return map;
}

std::vector<Tensor> model_inputs(const Dataset& data, std::size_t sample,
                                 const std::vector<std::size_t>& modalities) {
  std::vector<Tensor> images;
  for (std::size_t m : modalities) images.push_back(data.image(sample, m));
  return images;
}

Tensor predict_logits(const StitchModel& model, const std::vector<Tensor>& images, const ForwardContext& ctx,
                      std::size_t height, std::size_t width) {
  return upsample_bilinear(model_forward(images, model, ctx), height, width);
}

double train_step(const StitchModel& model, const Dataset& data, std::span<const std::size_t> batch,
                  AdamW& optimizer, double lr, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto modalities = modality_map(model, data);
  const ForwardContext ctx{Mode::kTrain, &rng};
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  // Gradients of the batch mean accumulate sample by sample.
  for (std::size_t idx : batch) {
    Tensor logits = predict_logits(model, model_inputs(data, idx, modalities), ctx, data.height, data.width);
    Tensor loss = cross_entropy(logits, data.samples[idx].labels);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      optimizer.zero_grad();
      throw TrainingError("non-finite loss " + std::to_string(value) + " on sample " + std::to_string(idx) +
                          " at step " + std::to_string(optimizer.steps() + 1));
    }
    total += value;
    backward(scale(loss, inv));
  }
  optimizer.step(lr);
  optimizer.zero_grad();
  return total * inv;
}

TrainResult fit(const StitchModel& model, const Dataset& train, const TrainConfig& cfg, const Dataset* eval,
                const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("training set is empty");
  AdamW optimizer(model.trainable_parameters(), cfg);
  Rng rng = Rng::derive(cfg.seed, 0x7A11);
  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = batch_iter(train.size(), cfg.batch_size, cfg.seed, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t k = 0; k < batches.size(); ++k) {
      const double t = static_cast<double>(epoch) +
                       static_cast<double>(k + 1) / static_cast<double>(batches.size());
      const double lr = lr_at(t, cfg);
      loss_sum += train_step(model, train, batches[k], optimizer, lr, rng);
      rec.lr_end = lr;
    }
    rec.mean_loss = loss_sum / static_cast<double>(batches.size());
    if (eval != nullptr) rec.eval_miou = evaluate(model, *eval).miou;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.steps = optimizer.steps();
  return result;
}

SegMetrics evaluate(const StitchModel& model, const Dataset& data) {
  NoGradGuard no_grad;
  const auto modalities = modality_map(model, data);
  const ForwardContext ctx{Mode::kEval, nullptr};
  std::vector<std::vector<std::uint16_t>> predictions, truth;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor logits = predict_logits(model, model_inputs(data, i, modalities), ctx, data.height, data.width);
    predictions.push_back(argmax_labels(logits));
    truth.push_back(data.samples[i].labels);
  }
  return evaluate_labels(predictions, truth, model.config.num_classes);
}

}  // namespace stitchfusion
