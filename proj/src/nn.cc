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

#include "stitchfusion/nn.h"

#include <vector>

namespace stitchfusion {

Linear Linear::truncated_normal(std::size_t in, std::size_t out, Rng& rng, double std) {
  std::vector<double> w(in * out);
  for (double& v : w) v = rng.truncated_normal(std);
  return {Tensor::from_data({in, out}, std::move(w), true), Tensor::zeros({out}, true)};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
  return {Tensor::zeros({in, out}, true), Tensor::zeros({out}, true)};
}

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) const {
  fn(prefix + ".weight", weight);
  fn(prefix + ".bias", bias);
}

Tensor linear(const Tensor& x, const Linear& layer) {
  return add_bias(matmul(x, layer.weight), layer.bias);
}

LayerNormParams LayerNormParams::identity(std::size_t dim) {
  return {Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true)};
}

void LayerNormParams::visit(const std::string& prefix, const ParamVisitor& fn) const {
  fn(prefix + ".gamma", gamma);
  fn(prefix + ".beta", beta);
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
  return layer_norm(x, p.gamma, p.beta);
}

}  // namespace stitchfusion
