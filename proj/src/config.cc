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

#include "stitchfusion/config.h"

#include <set>
#include <sstream>

namespace stitchfusion {

using nlohmann::json;

json encoder_config_to_json(const EncoderConfig& c) {
  json stages = json::array();
  for (const auto& s : c.stages) {
    stages.push_back({{"dim", s.dim},
                      {"depth", s.depth},
                      {"heads", s.heads},
                      {"patch_size", s.patch_size},
                      {"stride", s.stride},
                      {"sr_ratio", s.sr_ratio}});
  }
  return {{"preset", c.preset},
          {"in_channels", c.in_channels},
          {"mlp_ratio", c.mlp_ratio},
          {"drop_path_rate", c.drop_path_rate},
          {"stages", stages}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.mlp_ratio = j.at("mlp_ratio").get<std::size_t>();
  c.drop_path_rate = j.at("drop_path_rate").get<double>();
  for (const auto& s : j.at("stages")) {
    StageConfig sc;
    sc.dim = s.at("dim").get<std::size_t>();
    sc.depth = s.at("depth").get<std::size_t>();
    sc.heads = s.at("heads").get<std::size_t>();
    sc.patch_size = s.at("patch_size").get<std::size_t>();
    sc.stride = s.at("stride").get<std::size_t>();
    sc.sr_ratio = s.at("sr_ratio").get<std::size_t>();
    c.stages.push_back(sc);
  }
  return c;
}

json model_config_to_json(const ModelConfig& c) {
  return {{"encoder", encoder_config_to_json(c.encoder)},
          {"modalities", c.modalities},
          {"stitched", c.stitched},
          {"density", density_name(c.density.variant)},
          {"stages", format_stage_list(c.density.active_stages)},
          {"rank", c.rank},
          {"adapter_dropout", c.adapter_dropout},
          {"use_ffm", c.use_ffm},
          {"decoder_dim", c.decoder_dim},
          {"num_classes", c.num_classes}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.encoder = encoder_config_from_json(j.at("encoder"));
  c.modalities = j.at("modalities").get<std::vector<std::string>>();
  c.stitched = j.at("stitched").get<bool>();
  c.density.variant = parse_density(j.at("density").get<std::string>());
  c.density.active_stages = parse_stage_list(j.at("stages").get<std::string>());
  c.rank = j.at("rank").get<std::size_t>();
  c.adapter_dropout = j.at("adapter_dropout").get<double>();
  c.use_ffm = j.at("use_ffm").get<bool>();
  c.decoder_dim = j.at("decoder_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  return c;
}

std::vector<std::size_t> parse_stage_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      throw ConfigError("stages: '" + item + "' is not a stage number");
    }
    if (pos != item.size() || v == 0) throw ConfigError("stages: '" + item + "' is not a 1-based stage number");
    out.push_back(static_cast<std::size_t>(v - 1));
  }
  if (out.empty()) throw ConfigError("stages: at least one stage is required");
  std::set<std::size_t> unique(out.begin(), out.end());
  return {unique.begin(), unique.end()};
}

std::string format_stage_list(const std::vector<std::size_t>& stages) {
  std::string s;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(stages[i] + 1);
  }
  return s;
}

namespace {

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "preset", "modalities", "density", "stages", "rank", "ffm", "stitched", "adapter_dropout",
      "drop_path", "decoder_dim", "base_lr", "warmup_epochs", "decay_factor", "epochs", "batch_size",
      "weight_decay", "beta1", "beta2", "eps", "seed", "data", "eval_data", "out"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  RunConfig c;
  if (j.contains("preset")) c.preset = field<std::string>(j, "preset");
  if (j.contains("modalities")) c.modalities = field<std::vector<std::string>>(j, "modalities");
  if (j.contains("density")) c.density = field<std::string>(j, "density");
  if (j.contains("stages")) {
    if (j.at("stages").is_string()) {
      c.stages = parse_stage_list(field<std::string>(j, "stages"));
    } else {
      std::string joined;
      for (auto v : field<std::vector<std::size_t>>(j, "stages")) joined += std::to_string(v) + ",";
      c.stages = parse_stage_list(joined);
    }
  }
  if (j.contains("rank")) c.rank = field<std::size_t>(j, "rank");
  if (j.contains("ffm")) c.ffm = field<bool>(j, "ffm");
  if (j.contains("stitched")) c.stitched = field<bool>(j, "stitched");
  if (j.contains("adapter_dropout")) c.adapter_dropout = field<double>(j, "adapter_dropout");
  if (j.contains("drop_path")) c.drop_path = field<double>(j, "drop_path");
  if (j.contains("decoder_dim")) c.decoder_dim = field<std::size_t>(j, "decoder_dim");
  if (j.contains("base_lr")) c.train.base_lr = field<double>(j, "base_lr");
  if (j.contains("warmup_epochs")) c.train.warmup_epochs = field<double>(j, "warmup_epochs");
  if (j.contains("decay_factor")) c.train.decay_factor = field<double>(j, "decay_factor");
  if (j.contains("epochs")) c.train.epochs = field<std::size_t>(j, "epochs");
  if (j.contains("batch_size")) c.train.batch_size = field<std::size_t>(j, "batch_size");
  if (j.contains("weight_decay")) c.train.weight_decay = field<double>(j, "weight_decay");
  if (j.contains("beta1")) c.train.beta1 = field<double>(j, "beta1");
  if (j.contains("beta2")) c.train.beta2 = field<double>(j, "beta2");
  if (j.contains("eps")) c.train.eps = field<double>(j, "eps");
  if (j.contains("seed")) c.train.seed = field<std::uint64_t>(j, "seed");
  if (j.contains("data")) c.data = field<std::string>(j, "data");
  if (j.contains("eval_data")) c.eval_data = field<std::string>(j, "eval_data");
  if (j.contains("out")) c.out = field<std::string>(j, "out");
  return c;
}

json RunConfig::to_json() const {
  return {{"preset", preset},
          {"modalities", modalities},
          {"density", density},
          {"stages", format_stage_list(stages)},
          {"rank", rank},
          {"ffm", ffm},
          {"stitched", stitched},
          {"adapter_dropout", adapter_dropout},
          {"drop_path", drop_path},
          {"decoder_dim", decoder_dim},
          {"base_lr", train.base_lr},
          {"warmup_epochs", train.warmup_epochs},
          {"decay_factor", train.decay_factor},
          {"epochs", train.epochs},
          {"batch_size", train.batch_size},
          {"weight_decay", train.weight_decay},
          {"beta1", train.beta1},
          {"beta2", train.beta2},
          {"eps", train.eps},
          {"seed", train.seed},
          {"data", data},
          {"eval_data", eval_data},
          {"out", out}};
}

void RunConfig::validate() const {
  auto wrap = [](const char* fieldname, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(fieldname) + ": " + e.what());
    }
  };
  wrap("preset", [&] { EncoderConfig::from_preset(preset).validate(); });
  wrap("density", [&] { parse_density(density); });
  wrap("stages", [&] { DensityConfig{parse_density(density), stages}.validate(EncoderConfig::from_preset(preset).num_stages()); });
  if (stitched && rank == 0) throw ConfigError("rank: must be at least 1");
  if (!(adapter_dropout >= 0.0 && adapter_dropout < 1.0)) throw ConfigError("adapter_dropout: must lie in [0, 1)");
  if (!(drop_path >= 0.0 && drop_path < 1.0)) throw ConfigError("drop_path: must lie in [0, 1)");
  if (decoder_dim == 0) throw ConfigError("decoder_dim: must be positive");
  wrap("train", [&] { train.validate(); });
}

ModelConfig RunConfig::model_config(const Dataset& data) const {
  validate();
  ModelConfig c;
  std::vector<std::string> names = modalities;
  if (names.empty())
    for (const auto& m : data.modalities) names.push_back(m.name);
  std::size_t channels = 0;
  for (const auto& name : names) {
    std::size_t idx = 0;
    try {
      idx = data.modality_index(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("modalities: ") + e.what());
    }
    const std::size_t ch = data.modalities[idx].channels;
    if (channels != 0 && ch != channels)
      throw ConfigError("modalities: all selected modalities must share one channel count");
    channels = ch;
  }
  c.encoder = EncoderConfig::from_preset(preset, channels);
  c.encoder.drop_path_rate = drop_path;
  c.modalities = names;
  c.stitched = stitched && names.size() >= 2;
  c.density = {parse_density(density), stages};
  c.rank = rank;
  c.adapter_dropout = adapter_dropout;
  c.use_ffm = ffm;
  c.decoder_dim = decoder_dim;
  c.num_classes = data.num_classes;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return c;
}

}  // namespace stitchfusion
