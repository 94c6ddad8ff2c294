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
#include <span>
#include <string>
#include <vector>

#include "stitchfusion/dataset.h"

namespace stitchfusion {

/// counts[gt][pred] over scored (non-ignored) pixels.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0);

  void add(std::span<const std::uint16_t> prediction, std::span<const std::uint16_t> ground_truth,
           std::uint16_t ignore_index = kIgnoreIndex);
  /// Integer addition; associative, so any merge order gives the same counts.
  void merge(const ConfusionMatrix& other);

  std::size_t num_classes() const { return num_classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * num_classes_ + pred]; }
  std::uint64_t total() const;

  /// TP / (TP + FP + FN); nullopt when the class is absent from both the
  /// prediction and the ground truth.
  std::optional<double> iou(std::size_t cls) const;
  /// Unweighted mean of the defined IoUs, in [0, 1].
  double mean_iou() const;
  double pixel_accuracy() const;

  bool operator==(const ConfusionMatrix& o) const = default;

 private:
  std::size_t num_classes_;
  std::vector<std::uint64_t> counts_;
};

struct SegMetrics {
  ConfusionMatrix confusion;
  std::vector<std::optional<double>> class_iou;
  double miou = 0.0;  // percent
  double pixel_accuracy = 0.0;  // percent

  static SegMetrics from_confusion(const ConfusionMatrix& cm);
  /// Structured key/value record.
  std::string to_json(const std::vector<std::string>& class_names = {}) const;
  /// "class,iou" rows followed by an mIoU row, percentages with 2 decimals.
  std::string per_class_csv(const std::vector<std::string>& class_names = {}) const;
};

/// Metrics over aligned prediction / ground-truth label maps, accumulated in
/// order into one confusion matrix.
SegMetrics evaluate_labels(const std::vector<std::vector<std::uint16_t>>& predictions,
                           const std::vector<std::vector<std::uint16_t>>& ground_truth, std::size_t num_classes,
                           std::uint16_t ignore_index = kIgnoreIndex);

}  // namespace stitchfusion
