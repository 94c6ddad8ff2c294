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

#include <filesystem>

#include "stitchfusion/stitch.h"

namespace stitchfusion {

inline constexpr int kCheckpointFormatVersion = 1;

enum class CheckpointScope { kFull, kAdaptersOnly };

/// checkpoint.json (model config + parameter table) plus one raw
/// little-endian f64 blob per parameter tensor.
void save_checkpoint(const StitchModel& model, const std::filesystem::path& dir,
                     CheckpointScope scope = CheckpointScope::kFull);

/// Rebuilds the model described by a full checkpoint.
StitchModel load_checkpoint(const std::filesystem::path& dir);
/// Same, but first checks the stored config against `expected`.
StitchModel load_checkpoint(const std::filesystem::path& dir, const ModelConfig& expected);
/// Copies every tensor in the checkpoint into `model` (full or partial),
/// validating config compatibility and shapes.
void load_parameters(StitchModel& model, const std::filesystem::path& dir);

}  // namespace stitchfusion
