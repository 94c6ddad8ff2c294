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
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "stitchfusion/tensor.h"

namespace stitchfusion {

inline constexpr std::uint16_t kIgnoreIndex = 255;
inline constexpr int kDatasetFormatVersion = 1;

struct ModalitySpec {
  std::string name;
  std::size_t channels = 3;
};

/// Aligned modality images (float32, [C x H x W], values in [0, 1]) plus a
/// label map [H x W].
struct MultimodalSample {
  std::vector<std::vector<float>> images;
  std::vector<std::uint16_t> labels;
};

struct Dataset {
  int version = kDatasetFormatVersion;
  std::uint64_t seed = 0;
  std::size_t num_classes = 0;
  std::vector<ModalitySpec> modalities;
  std::size_t height = 0;
  std::size_t width = 0;
  std::string split = "train";
  /// visibility[c][m]: class c renders with contrast in modality m.
  std::vector<std::vector<bool>> visibility;
  std::vector<MultimodalSample> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t modality_index(const std::string& name) const;
  /// Sample image of one modality as a [C x H x W] double tensor.
  Tensor image(std::size_t sample, std::size_t modality) const;
  void validate() const;
};

/// Failure while reading or validating a dataset or checkpoint directory.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthOptions {
  std::size_t samples = 0;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t num_classes = 5;
  std::size_t modalities = 2;
  std::size_t channels = 3;
  std::uint64_t seed = 0;
  std::string split = "train";
  /// Names default to "mod0", "mod1", ...
  std::vector<std::string> modality_names;
};

inline constexpr double kSynthNoiseStd = 0.05;
inline constexpr double kSynthBackground = 0.5;

/// Random rectangles and discs; class c is drawn with contrast only in the
/// modalities of visibility[c] and at background level elsewhere.
Dataset generate_synthetic(const SynthOptions& options);

/// Foreground class -> visible modalities: the classes are shuffled with the
/// seed and dealt round-robin, so each modality misses at least one class.
std::vector<std::vector<bool>> assign_visibility(std::size_t num_classes, std::size_t modalities,
                                                 std::uint64_t seed);

/// Writes manifest.json and raw little-endian blobs under `dir`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Deterministic shuffled index batches for one epoch; the last partial
/// batch is kept.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t dataset_size, std::size_t batch_size,
                                                 std::uint64_t shuffle_seed, std::uint64_t epoch);

// Raw blob helpers shared with the checkpoint format.
void write_f32_blob(const std::filesystem::path& path, const std::vector<float>& values);
void write_u16_blob(const std::filesystem::path& path, const std::vector<std::uint16_t>& values);
void write_f64_blob(const std::filesystem::path& path, std::span<const double> values);
std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t count);
std::vector<std::uint16_t> read_u16_blob(const std::filesystem::path& path, std::size_t count);
std::vector<double> read_f64_blob(const std::filesystem::path& path, std::size_t count);

/// Resolves a manifest-relative path, rejecting absolute paths and "..".
std::filesystem::path resolve_relative(const std::filesystem::path& root, const std::string& rel);

}  // namespace stitchfusion
