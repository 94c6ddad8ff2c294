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

#include "stitchfusion/rng.h"

namespace sf = stitchfusion;

TEST(Rng, SameSeedSameStream) {
  sf::Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedStreamsDiffer) {
  auto a = sf::Rng::derive(5, 1), b = sf::Rng::derive(5, 2), c = sf::Rng::derive(6, 1);
  const auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  EXPECT_EQ(sf::Rng::derive(5, 1).next_u64(), x);
}

TEST(Rng, UniformMoments) {
  sf::Rng rng(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, UniformIntCoversInclusiveRange) {
  sf::Rng rng(2);
  int hits[4] = {0, 0, 0, 0};
  for (int i = 0; i < 4000; ++i) {
    const auto v = rng.uniform_int(-1, 2);
    ASSERT_GE(v, -1);
    ASSERT_LE(v, 2);
    ++hits[v + 1];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  EXPECT_EQ(rng.uniform_int(3, 3), 3);
  EXPECT_THROW(rng.uniform_int(2, 1), std::invalid_argument);
}

TEST(Rng, NormalMoments) {
  sf::Rng rng(3);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, TruncatedNormalStaysWithinTwoSigma) {
  sf::Rng rng(4);
  for (int i = 0; i < 20000; ++i) EXPECT_LE(std::abs(rng.truncated_normal(0.02)), 0.04);
}
