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

#include <gtest/gtest.h>

#include <cmath>

#include "stitchfusion/grad_check.h"
#include "stitchfusion/ops.h"
#include "stitchfusion/tensor.h"

namespace sf = stitchfusion;
using sf::Tensor;

namespace {

Tensor t2(std::size_t r, std::size_t c, std::vector<double> v, bool grad = false) {
  return Tensor::from_data({r, c}, std::move(v), grad);
}

}  // namespace

TEST(Tensor, FactoriesKeepDataLengthEqualToShapeProduct) {
  EXPECT_EQ(Tensor::zeros({2, 3, 4}).numel(), 24u);
  EXPECT_EQ(Tensor::full({5}, 1.5).data()[4], 1.5);
  EXPECT_EQ(Tensor::scalar(3.0).item(), 3.0);
  EXPECT_THROW(Tensor::from_data({2, 2}, {1, 2, 3}), sf::DimensionError);
}

TEST(Tensor, ItemRequiresSingleElement) {
  EXPECT_THROW(Tensor::zeros({2}).item(), sf::DimensionError);
}

TEST(Tensor, CopiesAreShallowClonesAreDeep) {
  Tensor a = Tensor::full({3}, 1.0);
  Tensor b = a;
  b.mutable_data()[0] = 7.0;
  EXPECT_EQ(a.data()[0], 7.0);
  Tensor c = a.clone();
  c.mutable_data()[1] = -1.0;
  EXPECT_EQ(a.data()[1], 1.0);
  EXPECT_FALSE(c.same_storage(a));
}

TEST(Backward, SumGivesOnes) {
  Tensor x = t2(2, 2, {1, -2, 3, 4}, true);
  sf::backward(sf::sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SumOfSquaresGivesTwoX) {
  Tensor x = t2(1, 3, {1.5, -2, 0.25}, true);
  sf::backward(sf::sum(sf::mul(x, x)));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(x.grad()[i], 2.0 * x.data()[i]);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tensor x = t2(1, 2, {1, 2}, true);
  EXPECT_THROW(sf::backward(sf::scale(x, 2.0)), sf::DimensionError);
}

TEST(Backward, GradShapeMatchesDataAndReachableLeavesArePopulated) {
  Tensor a = t2(2, 3, {1, 2, 3, 4, 5, 6}, true);
  Tensor b = t2(3, 2, {1, 0, 0, 1, 1, 1}, true);
  Tensor unused = t2(1, 1, {1}, true);
  sf::backward(sf::sum(sf::matmul(a, b)));
  EXPECT_EQ(a.grad().size(), a.numel());
  EXPECT_EQ(b.grad().size(), b.numel());
  EXPECT_FALSE(unused.has_grad());
}

TEST(Backward, FanOutSumsBothContributions) {
  Tensor x = t2(1, 2, {0.5, -1.0}, true);
  // x feeds mul twice and add once: d/dx (x^2 + x) = 2x + 1
  sf::backward(sf::sum(sf::add(sf::mul(x, x), x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -1.0);
}

TEST(Backward, LeafGradsAccumulateAcrossCalls) {
  Tensor x = t2(1, 2, {1, 2}, true);
  sf::backward(sf::sum(x));
  sf::backward(sf::sum(x));
  EXPECT_EQ(x.grad()[0], 2.0);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor x = t2(1, 2, {1, 2}, true);
  Tensor y;
  {
    sf::NoGradGuard guard;
    EXPECT_FALSE(sf::grad_mode_enabled());
    y = sf::sum(sf::mul(x, x));
  }
  EXPECT_TRUE(sf::grad_mode_enabled());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, DetachCutsTheGraph) {
  Tensor x = t2(1, 2, {3, 4}, true);
  sf::backward(sf::sum(sf::mul(x, x.detach())));
  EXPECT_EQ(x.grad()[0], 3.0);
  EXPECT_EQ(x.grad()[1], 4.0);
}

TEST(Backward, RequiresGradOnlySettableOnLeaves) {
  Tensor x = t2(1, 2, {1, 2}, true);
  Tensor y = sf::scale(x, 2.0);
  EXPECT_THROW(y.set_requires_grad(false), std::logic_error);
}

TEST(GradCheck, SumIsExactAtZero) {
  Tensor x = Tensor::zeros({3, 4});
  auto report = sf::grad_check([](const Tensor& v) { return sf::sum(v); }, x);
  EXPECT_EQ(report.max_rel_error, 0.0);
  EXPECT_EQ(report.coordinates, 12u);
}

TEST(GradCheck, SumIsExactOnDyadicInput) {
  Tensor x = t2(2, 2, {0.5, -0.25, 1.0, 2.0});
  auto report = sf::grad_check([](const Tensor& v) { return sf::sum(v); }, x);
  EXPECT_LT(report.max_rel_error, 1e-10);
}

TEST(GradCheck, GeluSumBelowOneMicro) {
  sf::Rng rng(3);
  std::vector<double> v(20);
  for (double& x : v) x = 2.0 * rng.normal();
  Tensor x = Tensor::from_data({4, 5}, v);
  auto report = sf::grad_check([](const Tensor& t) { return sf::sum(sf::gelu(t)); }, x);
  EXPECT_LT(report.max_rel_error, 1e-6);
}

TEST(GradCheck, FlagsAWrongGradient) {
  // detach hides half the dependence, so reverse mode reports x but the
  // true derivative of sum(x*x) is 2x
  Tensor x = t2(1, 3, {1.0, 2.0, 3.0});
  auto report = sf::grad_check([](const Tensor& t) { return sf::sum(sf::mul(t, t.detach())); }, x);
  EXPECT_GT(report.max_rel_error, 0.4);
}

TEST(GradCheck, RestoresInputsAndFlags) {
  Tensor x = t2(1, 3, {1.0, 2.0, 3.0});
  sf::grad_check([](const Tensor& t) { return sf::sum(sf::gelu(t)); }, x);
  EXPECT_FALSE(x.requires_grad());
  EXPECT_FALSE(x.has_grad());
  EXPECT_EQ(x.data()[2], 3.0);
}

TEST(GradCheck, CoordinateSamplingLimitsProbes) {
  Tensor x = Tensor::full({10, 10}, 0.5);
  auto report = sf::grad_check([&] { return sf::sum(sf::gelu(x)); }, {x}, 1e-4, 7, 1);
  EXPECT_EQ(report.coordinates, 7u);
}
