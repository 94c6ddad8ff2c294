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

#include "stitchfusion/checkpoint.h"

#include <cstdio>
#include <fstream>
#include <map>

#include "json.hpp"
#include "stitchfusion/config.h"
#include "stitchfusion/dataset.h"

namespace stitchfusion {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "checkpoint.json";
constexpr const char* kFormat = "stitchfusion-checkpoint";

const char* scope_name(CheckpointScope scope) {
  return scope == CheckpointScope::kFull ? "full" : "adapters";
}

struct Manifest {
  CheckpointScope scope = CheckpointScope::kFull;
  ModelConfig config;
  std::uint64_t seed = 0;
  json params;
};

Manifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifest);
  if (!in) throw FormatError("cannot open " + (dir / kManifest).string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  Manifest m;
  try {
    if (j.at("format").get<std::string>() != kFormat) throw FormatError("not a checkpoint manifest");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                        std::to_string(kCheckpointFormatVersion) + ")");
    }
    const std::string scope = j.at("scope").get<std::string>();
    if (scope == "full") {
      m.scope = CheckpointScope::kFull;
    } else if (scope == "adapters") {
      m.scope = CheckpointScope::kAdaptersOnly;
    } else {
      throw FormatError("unknown checkpoint scope '" + scope + "'");
    }
    m.config = model_config_from_json(j.at("config"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.params = j.at("params");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  return m;
}

bool same_layout(const ModelConfig& a, const ModelConfig& b) {
  return model_config_to_json(a) == model_config_to_json(b);
}

void copy_tensors(const fs::path& dir, const json& params, std::map<std::string, Tensor>& targets) {
  for (const auto& entry : params) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    if (entry.at("dtype").get<std::string>() != "f64") throw FormatError(name + ": unsupported dtype");
    auto it = targets.find(name);
    if (it == targets.end()) throw FormatError("checkpoint tensor '" + name + "' has no counterpart in the model");
    Tensor& t = it->second;
    if (t.shape() != shape) {
      throw FormatError("shape mismatch for '" + name + "': checkpoint " + shape_to_string(shape) + ", model " +
                        shape_to_string(t.shape()));
    }
    const auto values = read_f64_blob(resolve_relative(dir, entry.at("path").get<std::string>()), t.numel());
    auto dst = t.mutable_data();
    std::copy(values.begin(), values.end(), dst.begin());
  }
}

}  // namespace

void save_checkpoint(const StitchModel& model, const fs::path& dir, CheckpointScope scope) {
  std::error_code ec;
  fs::create_directories(dir / "params", ec);
  if (ec) throw FormatError("cannot create " + (dir / "params").string() + ": " + ec.message());
  json params = json::array();
  auto write = [&](const std::string& name, const Tensor& t) {
    char file[32];
    std::snprintf(file, sizeof(file), "params/%06zu.f64", params.size());
    write_f64_blob(dir / file, t.data());
    params.push_back({{"name", name}, {"path", file}, {"shape", t.shape()}, {"dtype", "f64"}});
  };
  if (scope == CheckpointScope::kFull) {
    model.visit(write);
  } else {
    model.visit_adapters(write);
  }
  json j = {{"format", kFormat},
            {"version", kCheckpointFormatVersion},
            {"scope", scope_name(scope)},
            {"seed", model.seed},
            {"config", model_config_to_json(model.config)},
            {"params", params}};
  std::ofstream out(dir / kManifest);
  if (!out) throw FormatError("cannot write " + (dir / kManifest).string());
  out << j.dump(2) << '\n';
  if (!out) throw FormatError("failed writing " + (dir / kManifest).string());
}

StitchModel load_checkpoint(const fs::path& dir) {
  const Manifest m = read_manifest(dir);
  if (m.scope != CheckpointScope::kFull)
    throw FormatError("adapters-only checkpoint needs a model to load into; use load_parameters");
  StitchModel model = build_model(m.config, m.seed);
  load_parameters(model, dir);
  return model;
}

StitchModel load_checkpoint(const fs::path& dir, const ModelConfig& expected) {
  const Manifest m = read_manifest(dir);
  if (!same_layout(m.config, expected)) {
    throw FormatError("checkpoint config does not match: checkpoint has " +
                      std::to_string(m.config.num_modalities()) + " modalities (" +
                      model_config_to_json(m.config).dump() + "), expected " + model_config_to_json(expected).dump());
  }
  return load_checkpoint(dir);
}

void load_parameters(StitchModel& model, const fs::path& dir) {
  const Manifest m = read_manifest(dir);
  if (!same_layout(m.config, model.config))
    throw FormatError("checkpoint config does not match the target model");
  std::map<std::string, Tensor> targets;
  model.visit([&](const std::string& name, const Tensor& t) { targets.emplace(name, t); });
  try {
    copy_tensors(dir, m.params, targets);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint parameter table: ") + e.what());
  }
}

}  // namespace stitchfusion
