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
#include <cstring>
#include <functional>
#include <fstream>
#include <set>

#include "json.hpp"
#include "stitchfusion/dataset.h"
#include "test_util.h"

namespace sf = stitchfusion;
using sf::testing::ScratchDir;

namespace {

sf::SynthOptions options(std::size_t n, std::uint64_t seed, std::size_t classes = 5) {
  sf::SynthOptions o;
  o.samples = n;
  o.seed = seed;
  o.num_classes = classes;
  return o;
}

bool same(const sf::Dataset& a, const sf::Dataset& b) {
  if (a.size() != b.size() || a.visibility != b.visibility) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.samples[i].labels != b.samples[i].labels) return false;
    for (std::size_t m = 0; m < a.samples[i].images.size(); ++m) {
      const auto& x = a.samples[i].images[m];
      const auto& y = b.samples[i].images[m];
      if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) != 0) return false;
    }
  }
  return true;
}

void edit_manifest(const std::filesystem::path& dir, const std::function<void(nlohmann::json&)>& fn) {
  nlohmann::json j;
  {
    std::ifstream in(dir / "manifest.json");
    in >> j;
  }
  fn(j);
  std::ofstream(dir / "manifest.json") << j.dump();
}

}  // namespace

TEST(Synthetic, DeterministicInSeed) {
  EXPECT_TRUE(same(sf::generate_synthetic(options(6, 3)), sf::generate_synthetic(options(6, 3))));
  EXPECT_FALSE(same(sf::generate_synthetic(options(6, 3)), sf::generate_synthetic(options(6, 4))));
}

TEST(Synthetic, SplitsShareVisibilityButNotScenes) {
  auto o = options(4, 8);
  auto train = sf::generate_synthetic(o);
  o.split = "eval";
  auto eval = sf::generate_synthetic(o);
  EXPECT_EQ(train.visibility, eval.visibility);
  EXPECT_NE(train.samples[0].labels, eval.samples[0].labels);
}

TEST(Synthetic, VisibilitySplitsFourForegroundClassesTwoAndTwo) {
  auto vis = sf::assign_visibility(5, 2, 1);
  EXPECT_TRUE(vis[0][0] && vis[0][1]);  // background renders everywhere
  std::size_t a = 0, b = 0;
  for (std::size_t c = 1; c < 5; ++c) {
    EXPECT_NE(vis[c][0], vis[c][1]) << c;
    a += vis[c][0];
    b += vis[c][1];
  }
  EXPECT_EQ(a, 2u);
  EXPECT_EQ(b, 2u);
}

TEST(Synthetic, EveryModalityMissesSomeClass) {
  for (std::size_t m = 2; m <= 4; ++m) {
    auto vis = sf::assign_visibility(7, m, 5);
    for (std::size_t mod = 0; mod < m; ++mod) {
      bool misses = false;
      for (std::size_t c = 1; c < 7; ++c) misses |= !vis[c][mod];
      EXPECT_TRUE(misses);
    }
  }
}

TEST(Synthetic, InvisibleClassesHaveOnlyNoiseContrast) {
  auto ds = sf::generate_synthetic(options(30, 9));
  const std::size_t hw = ds.height * ds.width;
  for (std::size_t c = 1; c < ds.num_classes; ++c) {
    for (std::size_t m = 0; m < 2; ++m) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& s : ds.samples)
        for (std::size_t p = 0; p < hw; ++p)
          if (s.labels[p] == c) {
            for (std::size_t ch = 0; ch < 3; ++ch) sum += std::abs(s.images[m][ch * hw + p] - sf::kSynthBackground);
            n += 3;
          }
      ASSERT_GT(n, 0u);
      const double contrast = sum / static_cast<double>(n);
      if (ds.visibility[c][m]) {
        EXPECT_GT(contrast, 0.15) << "class " << c << " modality " << m;
      } else {
        // mean |N(0, sigma)| = sigma * sqrt(2/pi)
        EXPECT_LT(contrast, sf::kSynthNoiseStd) << "class " << c << " modality " << m;
      }
    }
  }
}

TEST(Synthetic, LabelHistogramCoversAllClasses) {
  auto ds = sf::generate_synthetic(options(50, 10));
  std::set<std::uint16_t> seen;
  for (const auto& s : ds.samples) seen.insert(s.labels.begin(), s.labels.end());
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Synthetic, DegenerateSizesRejected) {
  auto o = options(2, 1);
  o.num_classes = 2;
  EXPECT_THROW(sf::generate_synthetic(o), std::invalid_argument);
  o = options(2, 1);
  o.modalities = 1;
  EXPECT_THROW(sf::generate_synthetic(o), std::invalid_argument);
  o = options(2, 1);
  o.height = 4;
  EXPECT_THROW(sf::generate_synthetic(o), std::invalid_argument);
}

TEST(DatasetIo, RoundTripIsBitExact) {
  ScratchDir dir;
  auto ds = sf::generate_synthetic(options(5, 11));
  sf::save_dataset(ds, dir.path());
  auto back = sf::load_dataset(dir.path());
  EXPECT_TRUE(same(ds, back));
  EXPECT_EQ(back.num_classes, ds.num_classes);
  EXPECT_EQ(back.seed, ds.seed);
  EXPECT_EQ(back.modalities[1].name, "mod1");
}

TEST(DatasetIo, TruncatedBlobReportsByteCount) {
  ScratchDir dir;
  sf::save_dataset(sf::generate_synthetic(options(2, 12)), dir.path());
  std::filesystem::resize_file(dir / "blobs/000001_mod0.f32", 100);
  try {
    sf::load_dataset(dir.path());
    FAIL();
  } catch (const sf::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bytes"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, MissingBlob) {
  ScratchDir dir;
  sf::save_dataset(sf::generate_synthetic(options(2, 13)), dir.path());
  std::filesystem::remove(dir / "blobs/000000_label.u16");
  EXPECT_THROW(sf::load_dataset(dir.path()), sf::FormatError);
}

TEST(DatasetIo, AbsolutePathsAndEscapesRejected) {
  ScratchDir dir;
  sf::save_dataset(sf::generate_synthetic(options(1, 14)), dir.path());
  const auto blob = (dir / "blobs/000000_mod0.f32").string();
  edit_manifest(dir.path(), [&](nlohmann::json& j) { j["samples"][0]["images"][0]["path"] = blob; });
  EXPECT_THROW(sf::load_dataset(dir.path()), sf::FormatError);
  edit_manifest(dir.path(), [&](nlohmann::json& j) { j["samples"][0]["images"][0]["path"] = "../x.f32"; });
  EXPECT_THROW(sf::load_dataset(dir.path()), sf::FormatError);
}

TEST(DatasetIo, UnknownVersionRejected) {
  ScratchDir dir;
  sf::save_dataset(sf::generate_synthetic(options(1, 15)), dir.path());
  edit_manifest(dir.path(), [](nlohmann::json& j) { j["version"] = 99; });
  EXPECT_THROW(sf::load_dataset(dir.path()), sf::FormatError);
}

TEST(DatasetIo, ShapeMismatchRejected) {
  ScratchDir dir;
  sf::save_dataset(sf::generate_synthetic(options(1, 16)), dir.path());
  edit_manifest(dir.path(), [](nlohmann::json& j) { j["samples"][0]["label"]["shape"] = {16, 16}; });
  EXPECT_THROW(sf::load_dataset(dir.path()), sf::FormatError);
}

TEST(DatasetIo, MissingManifest) {
  ScratchDir dir;
  EXPECT_THROW(sf::load_dataset(dir.path()), sf::FormatError);
}

TEST(BatchIter, SameSeedAndEpochSameOrder) {
  EXPECT_EQ(sf::batch_iter(37, 8, 3, 2), sf::batch_iter(37, 8, 3, 2));
}

TEST(BatchIter, EpochsShuffleDifferently) {
  EXPECT_NE(sf::batch_iter(20, 4, 3, 0), sf::batch_iter(20, 4, 3, 1));
}

TEST(BatchIter, BatchesPartitionTheDataset) {
  auto batches = sf::batch_iter(37, 8, 5, 0);
  EXPECT_EQ(batches.size(), 5u);
  EXPECT_EQ(batches.back().size(), 5u);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& b : batches) {
    total += b.size();
    seen.insert(b.begin(), b.end());
  }
  EXPECT_EQ(total, 37u);
  EXPECT_EQ(seen.size(), 37u);
  EXPECT_EQ(*seen.rbegin(), 36u);
}

TEST(BatchIter, ZeroBatchSizeThrows) { EXPECT_THROW(sf::batch_iter(4, 0, 1, 0), std::invalid_argument); }
