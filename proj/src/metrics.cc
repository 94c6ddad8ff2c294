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

#include "stitchfusion/metrics.h"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace stitchfusion {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {}

void ConfusionMatrix::add(std::span<const std::uint16_t> prediction,
                          std::span<const std::uint16_t> ground_truth, std::uint16_t ignore_index) {
  if (prediction.size() != ground_truth.size())
    throw std::invalid_argument("confusion matrix: prediction and ground truth sizes differ");
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const std::uint16_t gt = ground_truth[i];
    if (gt == ignore_index) continue;
    const std::uint16_t pd = prediction[i];
    if (gt >= num_classes_ || pd >= num_classes_)
      throw std::out_of_range("confusion matrix: class id out of range");
    ++counts_[gt * num_classes_ + pd];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw std::invalid_argument("confusion matrix: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::optional<double> ConfusionMatrix::iou(std::size_t cls) const {
  std::uint64_t row = 0, col = 0;
  for (std::size_t k = 0; k < num_classes_; ++k) {
    row += at(cls, k);
    col += at(k, cls);
  }
  const std::uint64_t tp = at(cls, cls);
  const std::uint64_t uni = row + col - tp;
  if (uni == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(uni);
}

double ConfusionMatrix::mean_iou() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < num_classes_; ++c) {
    if (auto v = iou(c)) {
      sum += *v;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double ConfusionMatrix::pixel_accuracy() const {
  std::uint64_t diag = 0;
  for (std::size_t c = 0; c < num_classes_; ++c) diag += at(c, c);
  const std::uint64_t t = total();
  return t == 0 ? 0.0 : static_cast<double>(diag) / static_cast<double>(t);
}

SegMetrics SegMetrics::from_confusion(const ConfusionMatrix& cm) {
  SegMetrics m;
  m.confusion = cm;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) m.class_iou.push_back(cm.iou(c));
  m.miou = 100.0 * cm.mean_iou();
  m.pixel_accuracy = 100.0 * cm.pixel_accuracy();
  return m;
}

SegMetrics evaluate_labels(const std::vector<std::vector<std::uint16_t>>& predictions,
                           const std::vector<std::vector<std::uint16_t>>& ground_truth, std::size_t num_classes,
                           std::uint16_t ignore_index) {
  if (predictions.size() != ground_truth.size())
    throw std::invalid_argument("evaluate_labels: prediction and ground-truth counts differ");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < predictions.size(); ++i) cm.add(predictions[i], ground_truth[i], ignore_index);
  return SegMetrics::from_confusion(cm);
}

namespace {

std::string class_label(const std::vector<std::string>& names, std::size_t c) {
  return c < names.size() ? names[c] : "class" + std::to_string(c);
}

}  // namespace

std::string SegMetrics::to_json(const std::vector<std::string>& class_names) const {
  nlohmann::ordered_json j;
  j["miou"] = miou;
  j["pixel_accuracy"] = pixel_accuracy;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < class_iou.size(); ++c) {
    nlohmann::ordered_json row;
    row["class"] = class_label(class_names, c);
    row["id"] = c;
    if (class_iou[c]) row["iou"] = 100.0 * *class_iou[c];
    else row["iou"] = nullptr;
    per.push_back(row);
  }
  j["per_class"] = per;
  nlohmann::ordered_json conf = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < confusion.num_classes(); ++g) {
    std::vector<std::uint64_t> row;
    for (std::size_t p = 0; p < confusion.num_classes(); ++p) row.push_back(confusion.at(g, p));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  return j.dump(2);
}

std::string SegMetrics::per_class_csv(const std::vector<std::string>& class_names) const {
  std::ostringstream os;
  os << "class,iou\n";
  char buf[32];
  for (std::size_t c = 0; c < class_iou.size(); ++c) {
    os << class_label(class_names, c) << ',';
    if (class_iou[c]) {
      std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *class_iou[c]);
      os << buf;
    }
    os << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.2f", miou);
  os << "mIoU," << buf << '\n';
  return os.str();
}

}  // namespace stitchfusion
