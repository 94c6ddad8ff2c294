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

#include "stitchfusion/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stitchfusion/rng.h"

namespace stitchfusion {

GradCheckReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                           double h, std::size_t max_coords, std::uint64_t sample_seed) {
  std::vector<Tensor> handles = inputs;
  std::vector<bool> saved_flags;
  for (Tensor& t : handles) {
    saved_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor loss = f();
  backward(loss);

  GradCheckReport report;
  Rng picker(sample_seed);
  for (std::size_t k = 0; k < handles.size(); ++k) {
    Tensor& t = handles[k];
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    std::vector<std::size_t> coords(t.numel());
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords != 0 && coords.size() > max_coords) {
      // partial Fisher-Yates
      for (std::size_t i = 0; i < max_coords; ++i) {
        const auto j = static_cast<std::size_t>(
            picker.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(coords.size() - 1)));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(max_coords);
    }
    NoGradGuard no_grad;
    for (std::size_t idx : coords) {
      double& slot = t.mutable_data()[idx];
      const double original = slot;
      const double up = original + h;
      const double down = original - h;
      slot = up;
      const double plus = f().item();
      slot = down;
      const double minus = f().item();
      slot = original;
      // divide by the step actually realized in floating point
      const double numeric = (plus - minus) / (up - down);
      const double a = analytic.empty() ? 0.0 : analytic[idx];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double err = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (err > report.max_rel_error || !std::isfinite(err)) {
        report.max_rel_error = std::isfinite(err) ? err : INFINITY;
        report.worst = std::to_string(k) + "#" + std::to_string(idx);
      }
    }
  }
  for (std::size_t k = 0; k < handles.size(); ++k) {
    handles[k].zero_grad();
    handles[k].set_requires_grad(saved_flags[k]);
  }
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  return grad_check([&] { return f(x); }, std::vector<Tensor>{x}, h);
}

}  // namespace stitchfusion
