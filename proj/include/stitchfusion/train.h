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
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stitchfusion/dataset.h"
#include "stitchfusion/metrics.h"
#include "stitchfusion/stitch.h"
#include "stitchfusion/tensor.h"

namespace stitchfusion {

struct TrainConfig {
  double base_lr = 6e-5;
  double warmup_epochs = 10.0;
  double decay_factor = 0.01;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Learning rate at fractional epoch t: linear ramp 0 -> base_lr over the
/// warm-up, then linear decay to base_lr * decay_factor at the final epoch.
double lr_at(double t, const TrainConfig& cfg);

/// Mean over non-ignored pixels of -log softmax(logits)[label].
/// logits [K x H x W], labels H*W. Zero scored pixels gives a constant 0.
Tensor cross_entropy(const Tensor& logits, std::span<const std::uint16_t> labels,
                     std::uint16_t ignore_index = kIgnoreIndex);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam with decoupled weight decay over a fixed parameter list.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, const TrainConfig& cfg);

  void step(double lr);
  void zero_grad();
  std::size_t steps() const { return steps_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  std::size_t steps_ = 0;
};

/// Dataset modality index for each model modality (matched by name).
std::vector<std::size_t> modality_map(const StitchModel& model, const Dataset& data);
std::vector<Tensor> model_inputs(const Dataset& data, std::size_t sample,
                                 const std::vector<std::size_t>& modalities);

/// Logits upsampled to label resolution.
Tensor predict_logits(const StitchModel& model, const std::vector<Tensor>& images,
                      const ForwardContext& ctx, std::size_t height, std::size_t width);

/// forward -> mean batch loss -> backward -> AdamW step on trainable
/// parameters only -> grads cleared. Returns the batch loss.
double train_step(const StitchModel& model, const Dataset& data, std::span<const std::size_t> batch,
                  AdamW& optimizer, double lr, Rng& rng);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr_end = 0.0;
  std::optional<double> eval_miou;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t steps = 0;
};

/// Full training run; evaluates on `eval` after every epoch when given.
TrainResult fit(const StitchModel& model, const Dataset& train, const TrainConfig& cfg,
                const Dataset* eval = nullptr, const EpochCallback& on_epoch = {});

SegMetrics evaluate(const StitchModel& model, const Dataset& data);

}  // namespace stitchfusion
