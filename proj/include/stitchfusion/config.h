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
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "stitchfusion/dataset.h"
#include "stitchfusion/stitch.h"
#include "stitchfusion/train.h"

namespace stitchfusion {

/// A configuration value failed validation; the message names the field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

nlohmann::json encoder_config_to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);
nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// "1,2,3,4" -> {0,1,2,3}; stage numbers are 1-based on the outside.
std::vector<std::size_t> parse_stage_list(const std::string& text);
std::string format_stage_list(const std::vector<std::size_t>& stages);

/// Everything a train/eval run needs. Mirrors the config-file keys one to one.
struct RunConfig {
  std::string preset = "tiny";
  /// Dataset modalities fed to the model; empty means all of them.
  std::vector<std::string> modalities;
  std::string density = "pair-bi";
  std::vector<std::size_t> stages{0, 1, 2, 3};  // 0-based
  std::size_t rank = kDefaultAdapterRank;
  bool ffm = false;
  bool stitched = true;
  double adapter_dropout = kDefaultAdapterDropout;
  double drop_path = 0.0;
  std::size_t decoder_dim = kTinyDecoderDim;
  TrainConfig train;
  std::string data;
  std::string eval_data;
  std::string out;

  /// Rejects unknown keys and mistyped values with a ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
  /// Model layout for a dataset (channel count, class count, modality names).
  ModelConfig model_config(const Dataset& data) const;
};

}  // namespace stitchfusion
