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

#include "stitchfusion/config.h"

namespace sf = stitchfusion;
using nlohmann::json;

TEST(StageList, OneBasedOutsideZeroBasedInside) {
  EXPECT_EQ(sf::parse_stage_list("1,2,3,4"), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(sf::parse_stage_list("4,3,3"), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(sf::format_stage_list({2, 3}), "3,4");
  EXPECT_THROW(sf::parse_stage_list("0"), sf::ConfigError);
  EXPECT_THROW(sf::parse_stage_list("x"), sf::ConfigError);
  EXPECT_THROW(sf::parse_stage_list(""), sf::ConfigError);
}

TEST(RunConfig, UnknownKeyIsAnError) {
  try {
    sf::RunConfig::from_json(json{{"learning_rate", 1.0}});
    FAIL();
  } catch (const sf::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
}

TEST(RunConfig, WrongTypeNamesTheField) {
  try {
    sf::RunConfig::from_json(json{{"epochs", "many"}});
    FAIL();
  } catch (const sf::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("epochs"), std::string::npos);
  }
}

TEST(RunConfig, JsonRoundTrip) {
  sf::RunConfig c;
  c.preset = "b2-like";
  c.density = "shared";
  c.stages = {2, 3};
  c.ffm = true;
  c.train.base_lr = 1.2e-4;
  c.train.seed = 77;
  c.modalities = {"rgb", "depth"};
  auto back = sf::RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.stages, c.stages);
}

TEST(RunConfig, StagesAcceptArrayOrString) {
  EXPECT_EQ(sf::RunConfig::from_json(json{{"stages", {3, 4}}}).stages, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(sf::RunConfig::from_json(json{{"stages", "3,4"}}).stages, (std::vector<std::size_t>{2, 3}));
}

TEST(RunConfig, ValidationMessagesNameFields) {
  sf::RunConfig c;
  c.density = "dense";
  EXPECT_THROW(c.validate(), sf::ConfigError);
  c = {};
  c.stages = {4};
  EXPECT_THROW(c.validate(), sf::ConfigError);
  c = {};
  c.train.epochs = 0;
  try {
    c.validate();
    FAIL();
  } catch (const sf::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train"), std::string::npos);
  }
}

TEST(RunConfig, ModelConfigFromDataset) {
  sf::SynthOptions o;
  o.samples = 1;
  o.modalities = 3;
  auto ds = sf::generate_synthetic(o);
  sf::RunConfig c;
  auto all = c.model_config(ds);
  EXPECT_EQ(all.modalities.size(), 3u);
  EXPECT_TRUE(all.stitched);
  EXPECT_EQ(all.num_classes, 5u);
  c.modalities = {"mod2"};
  auto single = c.model_config(ds);
  EXPECT_FALSE(single.stitched);
  c.modalities = {"thermal"};
  EXPECT_THROW(c.model_config(ds), sf::ConfigError);
}

TEST(ModelConfigJson, RoundTrip) {
  sf::ModelConfig c;
  c.encoder = sf::EncoderConfig::b2_like();
  c.modalities = {"a", "b", "c"};
  c.density = {sf::Density::kPairTwoUnidirectional, {1, 3}};
  c.num_classes = 9;
  c.use_ffm = true;
  auto back = sf::model_config_from_json(sf::model_config_to_json(c));
  EXPECT_EQ(sf::model_config_to_json(back), sf::model_config_to_json(c));
  EXPECT_EQ(back.density.active_stages, c.density.active_stages);
}
