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

#include "stitchfusion/adapter.h"

#include <algorithm>
#include <stdexcept>

namespace stitchfusion {

MultiAdapter MultiAdapter::init(std::size_t dim, std::size_t rank, Rng& rng, double dropout) {
  if (dim == 0 || rank == 0) throw std::invalid_argument("adapter dim and rank must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("adapter dropout must lie in [0, 1)");
  auto normal = [&rng](Shape shape) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.truncated_normal(kInitStd);
    return Tensor::from_data(std::move(shape), std::move(v), true);
  };
  MultiAdapter a;
  a.w_down = normal({dim, rank});
  a.b_down = Tensor::zeros({rank}, true);
  a.w_mid = normal({rank, rank});
  a.b_mid = Tensor::zeros({rank}, true);
  a.w_up = Tensor::zeros({rank, dim}, true);
  a.b_up = Tensor::zeros({dim}, true);
  a.dropout = dropout;
  return a;
}

std::size_t MultiAdapter::num_params() const {
  return w_down.numel() + b_down.numel() + w_mid.numel() + b_mid.numel() + w_up.numel() +
         b_up.numel();
}

void MultiAdapter::visit(const std::string& prefix, const ParamVisitor& fn) const {
  fn(prefix + ".w_down", w_down);
  fn(prefix + ".b_down", b_down);
  fn(prefix + ".w_mid", w_mid);
  fn(prefix + ".b_mid", b_mid);
  fn(prefix + ".w_up", w_up);
  fn(prefix + ".b_up", b_up);
}

MultiAdapter MultiAdapter::clone() const {
  MultiAdapter c = *this;
  c.w_down = w_down.clone();
  c.b_down = b_down.clone();
  c.w_mid = w_mid.clone();
  c.b_mid = b_mid.clone();
  c.w_up = w_up.clone();
  c.b_up = b_up.clone();
  return c;
}

void MultiAdapter::copy_from(const MultiAdapter& other) {
  auto copy = [](Tensor& dst, const Tensor& src) {
    if (dst.shape() != src.shape()) {
      throw DimensionError("adapter copy: " + shape_to_string(src.shape()) + " into " +
                           shape_to_string(dst.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  };
  copy(w_down, other.w_down);
  copy(b_down, other.b_down);
  copy(w_mid, other.w_mid);
  copy(b_mid, other.b_mid);
  copy(w_up, other.w_up);
  copy(b_up, other.b_up);
  dropout = other.dropout;
}

Tensor adapter_forward(const Tensor& x, const MultiAdapter& adapter, const ForwardContext& ctx) {
  const std::size_t d = adapter.dim();
  if (x.rank() < 1 || x.shape().back() != d) {
    throw DimensionError("adapter: input " + shape_to_string(x.shape()) +
                         " does not end in adapter dim " + std::to_string(d));
  }
  const Shape shape = x.shape();
  Tensor rows = x.rank() == 2 ? x : reshape(x, {x.numel() / d, d});
  Tensor down = add_bias(matmul(rows, adapter.w_down), adapter.b_down);
  Tensor mid = dropout(gelu(add_bias(matmul(down, adapter.w_mid), adapter.b_mid)), adapter.dropout, ctx);
  Tensor up = add_bias(matmul(mid, adapter.w_up), adapter.b_up);
  return x.rank() == 2 ? up : reshape(up, shape);
}

std::string density_name(Density d) {
  switch (d) {
    case Density::kShared:
      return "shared";
    case Density::kPairBidirectional:
      return "pair-bi";
    case Density::kPairTwoUnidirectional:
      return "pair-two-uni";
  }
  return "unknown";
}

Density parse_density(const std::string& name) {
  if (name == "shared" || name == "s") return Density::kShared;
  if (name == "pair-bi" || name == "ob") return Density::kPairBidirectional;
  if (name == "pair-two-uni" || name == "tu") return Density::kPairTwoUnidirectional;
  throw std::invalid_argument("unknown density '" + name + "' (expected shared, pair-bi or pair-two-uni)");
}

std::size_t routes_per_position(Density density, std::size_t m) {
  const std::size_t pairs = m * (m - 1) / 2;
  switch (density) {
    case Density::kShared:
      return 1;
    case Density::kPairBidirectional:
      return pairs;
    case Density::kPairTwoUnidirectional:
      return 2 * pairs;
  }
  return 0;
}

bool DensityConfig::is_active(std::size_t stage) const {
  return std::find(active_stages.begin(), active_stages.end(), stage) != active_stages.end();
}

void DensityConfig::validate(std::size_t num_stages) const {
  if (active_stages.empty()) throw std::invalid_argument("density config needs at least one active stage");
  for (std::size_t s : active_stages) {
    if (s >= num_stages) {
      throw std::invalid_argument("active stage " + std::to_string(s + 1) + " exceeds the " +
                                  std::to_string(num_stages) + " encoder stages");
    }
  }
}

std::string AdapterKey::name() const {
  return "s" + std::to_string(stage) + ".b" + std::to_string(block) + ".ada" +
         std::to_string(static_cast<int>(position)) + "." + std::to_string(first) + "-" +
         std::to_string(second);
}

AdapterBank::AdapterBank(Density density, std::size_t num_modalities)
    : density_(density), num_modalities_(num_modalities) {}

AdapterKey AdapterBank::key_for(std::size_t stage, std::size_t block, AdapterPosition position,
                                std::size_t from, std::size_t to) const {
  if (from == to || from >= num_modalities_ || to >= num_modalities_) {
    throw std::out_of_range("adapter route " + std::to_string(from) + "->" + std::to_string(to) +
                            " invalid for " + std::to_string(num_modalities_) + " modalities");
  }
  AdapterKey key{stage, block, position, 0, 0};
  switch (density_) {
    case Density::kShared:
      break;
    case Density::kPairBidirectional:
      key.first = std::min(from, to);
      key.second = std::max(from, to);
      break;
    case Density::kPairTwoUnidirectional:
      key.first = from;
      key.second = to;
      break;
  }
  return key;
}

const MultiAdapter& AdapterBank::route(std::size_t stage, std::size_t block, AdapterPosition position,
                                       std::size_t from, std::size_t to) const {
  const AdapterKey key = key_for(stage, block, position, from, to);
  auto it = adapters_.find(key);
  if (it == adapters_.end()) throw std::out_of_range("no adapter registered at " + key.name());
  return it->second;
}

MultiAdapter& AdapterBank::route(std::size_t stage, std::size_t block, AdapterPosition position,
                                 std::size_t from, std::size_t to) {
  const AdapterKey key = key_for(stage, block, position, from, to);
  auto it = adapters_.find(key);
  if (it == adapters_.end()) throw std::out_of_range("no adapter registered at " + key.name());
  return it->second;
}

bool AdapterBank::has_block(std::size_t stage, std::size_t block) const {
  auto it = adapters_.lower_bound(AdapterKey{stage, block, AdapterPosition::kAttn, 0, 0});
  return it != adapters_.end() && it->first.stage == stage && it->first.block == block;
}

void AdapterBank::insert(const AdapterKey& key, MultiAdapter adapter) {
  adapters_.insert_or_assign(key, std::move(adapter));
}

std::size_t AdapterBank::count_at(std::size_t stage, std::size_t block, AdapterPosition position) const {
  std::size_t n = 0;
  for (const auto& [key, _] : adapters_)
    if (key.stage == stage && key.block == block && key.position == position) ++n;
  return n;
}

std::size_t AdapterBank::num_params() const {
  std::size_t n = 0;
  for (const auto& [_, a] : adapters_) n += a.num_params();
  return n;
}

void AdapterBank::visit(const std::string& prefix, const ParamVisitor& fn) const {
  for (const auto& [key, a] : adapters_) a.visit(prefix + "." + key.name(), fn);
}

AdapterBank AdapterBank::clone() const {
  AdapterBank copy(density_, num_modalities_);
  for (const auto& [key, a] : adapters_) copy.adapters_.emplace(key, a.clone());
  return copy;
}

AdapterBank build_adapter_bank(std::size_t num_modalities, const EncoderConfig& config,
                               const DensityConfig& density, std::size_t rank, std::uint64_t seed,
                               double dropout) {
  if (num_modalities < 2) {
    throw std::invalid_argument("an adapter bank needs at least 2 modalities, got " +
                                std::to_string(num_modalities));
  }
  if (rank == 0) throw std::invalid_argument("adapter rank must be at least 1");
  config.validate();
  density.validate(config.num_stages());

  std::vector<std::pair<std::size_t, std::size_t>> routes;
  switch (density.variant) {
    case Density::kShared:
      routes.emplace_back(0, 0);
      break;
    case Density::kPairBidirectional:
      for (std::size_t i = 0; i < num_modalities; ++i)
        for (std::size_t j = i + 1; j < num_modalities; ++j) routes.emplace_back(i, j);
      break;
    case Density::kPairTwoUnidirectional:
      for (std::size_t i = 0; i < num_modalities; ++i)
        for (std::size_t j = 0; j < num_modalities; ++j)
          if (i != j) routes.emplace_back(i, j);
      break;
  }

  AdapterBank bank(density.variant, num_modalities);
  Rng rng = Rng::derive(seed, 0xADA9);
  for (std::size_t s = 0; s < config.num_stages(); ++s) {
    if (!density.is_active(s)) continue;
    for (std::size_t b = 0; b < config.stages[s].depth; ++b) {
      for (AdapterPosition pos : {AdapterPosition::kAttn, AdapterPosition::kMlp}) {
        for (const auto& [first, second] : routes) {
          bank.insert(AdapterKey{s, b, pos, first, second},
                      MultiAdapter::init(config.stages[s].dim, rank, rng, dropout));
        }
      }
    }
  }
  return bank;
}

}  // namespace stitchfusion
