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
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "stitchfusion/encoder.h"
#include "stitchfusion/nn.h"
#include "stitchfusion/ops.h"
#include "stitchfusion/tensor.h"

namespace stitchfusion {

inline constexpr std::size_t kDefaultAdapterRank = 8;
inline constexpr double kDefaultAdapterDropout = 0.1;

/// Down-project / GELU+dropout mid layer / up-project bottleneck.
///
///   down = x W_down + b_down            W_down [d x r]
///   mid  = Dropout(GELU(down W_mid + b_mid))   W_mid [r x r]
///   up   = mid W_up + b_up              W_up [r x d]
struct MultiAdapter {
  Tensor w_down, b_down;
  Tensor w_mid, b_mid;
  Tensor w_up, b_up;
  double dropout = kDefaultAdapterDropout;

  /// W_down/W_mid truncated normal (std 0.02); W_up, b_up and the other
  /// biases start at zero so a fresh adapter contributes exactly nothing.
  static MultiAdapter init(std::size_t dim, std::size_t rank, Rng& rng,
                           double dropout = kDefaultAdapterDropout);

  std::size_t dim() const { return w_down.dim(0); }
  std::size_t rank() const { return w_down.dim(1); }
  std::size_t num_params() const;
  void visit(const std::string& prefix, const ParamVisitor& fn) const;
  /// Deep copy of every buffer.
  MultiAdapter clone() const;
  /// Overwrites this adapter's buffers with `other`'s values.
  void copy_from(const MultiAdapter& other);
};

Tensor adapter_forward(const Tensor& x, const MultiAdapter& adapter, const ForwardContext& ctx);

enum class Density {
  kShared,                 // one adapter for every modality route
  kPairBidirectional,      // one adapter per unordered pair {i, j}
  kPairTwoUnidirectional,  // one adapter per ordered pair i -> j
};

std::string density_name(Density d);
/// Accepts "shared", "pair-bi", "pair-two-uni" (and the s/ob/tu shorthands).
Density parse_density(const std::string& name);

/// Number of adapters at one (stage, block, position) for M modalities.
std::size_t routes_per_position(Density density, std::size_t num_modalities);

struct DensityConfig {
  Density variant = Density::kPairBidirectional;
  /// 0-based stage indices that carry adapters.
  std::vector<std::size_t> active_stages;

  bool is_active(std::size_t stage) const;
  void validate(std::size_t num_stages) const;
};

/// Ada1 feeds the post-attention residual, Ada2 the post-MLP residual.
enum class AdapterPosition : int { kAttn = 1, kMlp = 2 };

struct AdapterKey {
  std::size_t stage = 0;
  std::size_t block = 0;
  AdapterPosition position = AdapterPosition::kAttn;
  /// Canonical route: (0, 0) for Shared, (min, max) for PairBidirectional,
  /// (from, to) for PairTwoUnidirectional.
  std::size_t first = 0;
  std::size_t second = 0;

  auto tie() const { return std::tie(stage, block, position, first, second); }
  bool operator<(const AdapterKey& o) const { return tie() < o.tie(); }
  bool operator==(const AdapterKey& o) const { return tie() == o.tie(); }
  std::string name() const;
};

/// Routing table (stage, block, position, route) -> MultiAdapter.
class AdapterBank {
 public:
  AdapterBank() = default;
  AdapterBank(Density density, std::size_t num_modalities);

  Density density() const { return density_; }
  std::size_t num_modalities() const { return num_modalities_; }

  /// Canonical key of the adapter carrying information from `from` to `to`.
  AdapterKey key_for(std::size_t stage, std::size_t block, AdapterPosition position,
                     std::size_t from, std::size_t to) const;
  const MultiAdapter& route(std::size_t stage, std::size_t block, AdapterPosition position,
                            std::size_t from, std::size_t to) const;
  MultiAdapter& route(std::size_t stage, std::size_t block, AdapterPosition position,
                      std::size_t from, std::size_t to);
  bool has_block(std::size_t stage, std::size_t block) const;

  void insert(const AdapterKey& key, MultiAdapter adapter);
  std::size_t size() const { return adapters_.size(); }
  std::size_t count_at(std::size_t stage, std::size_t block, AdapterPosition position) const;
  const std::map<AdapterKey, MultiAdapter>& entries() const { return adapters_; }
  std::map<AdapterKey, MultiAdapter>& entries() { return adapters_; }

  std::size_t num_params() const;
  void visit(const std::string& prefix, const ParamVisitor& fn) const;
  AdapterBank clone() const;

 private:
  Density density_ = Density::kPairBidirectional;
  std::size_t num_modalities_ = 0;
  std::map<AdapterKey, MultiAdapter> adapters_;
};

/// Populates one adapter per (active stage, block, position, route).
/// Deterministic in `seed`; entries are initialized in key order.
AdapterBank build_adapter_bank(std::size_t num_modalities, const EncoderConfig& config,
                               const DensityConfig& density, std::size_t rank, std::uint64_t seed,
                               double dropout = kDefaultAdapterDropout);

}  // namespace stitchfusion
