/**
 * Copyright 2026 The leafbg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include "leafbg/config.hpp"
#include "leafbg/error.hpp"

namespace leafbg {
namespace {

TEST(ConfigText, CommentsBlanksAndWhitespace) {
  const auto v = parse_config_text("# header\n\n  seed = 12  # trailing\nwork_dir=out\n\tsplit.ratios =\t6:2:2\n");
  EXPECT_EQ(v, (ConfigValues{{"seed", "12"}, {"work_dir", "out"}, {"split.ratios", "6:2:2"}}));
}

TEST(ConfigText, MalformedLinesNameTheLine) {
  try {
    parse_config_text("seed = 1\nno equals sign\n", "x.cfg");
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("x.cfg:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config_text(" = 3\n"), UsageError);
  EXPECT_THROW(read_config_file("/nonexistent/leafbg.cfg"), UsageError);
}

TEST(Config, DefaultsFollowTheTrainingSetup) {
  const PipelineConfig c = make_config({});
  EXPECT_EQ(c.epochs, 50);
  EXPECT_EQ(c.batch_size, 16);
  EXPECT_EQ(c.preprocess.target_size, 224);
  EXPECT_EQ(c.head.dense_units, (std::vector<int>{128, 64}));
  EXPECT_EQ(c.head.dropout_rate, 0.5);
  EXPECT_EQ(c.optimizers.at(OptimizerKind::adam).learning_rate, 2e-5);
  EXPECT_EQ(c.optimizers.at(OptimizerKind::rmsprop).momentum, 0.2);
  EXPECT_EQ(c.gate_bounds.min_fraction, 0.05);
  EXPECT_EQ(c.gate_bounds.max_fraction, 0.95);
}

TEST(Config, UnknownKeyAndBadValues) {
  EXPECT_THROW(make_config({{"train.epoch", "5"}}), UsageError);
  EXPECT_THROW(make_config({{"train.epochs", "five"}}), UsageError);
  EXPECT_THROW(make_config({{"train.epochs", "0"}}), UsageError);
  EXPECT_THROW(make_config({{"seed", "-1"}}), UsageError);
  EXPECT_THROW(make_config({{"freeze_boundary", "3"}}), UsageError);
  EXPECT_THROW(make_config({{"segment.threshold", "1"}}), UsageError);
  EXPECT_THROW(make_config({{"gate.min_fraction", "0.9"}, {"gate.max_fraction", "0.5"}}), UsageError);
  EXPECT_THROW(make_config({{"split.ratios", "6:2"}}), UsageError);
  EXPECT_THROW(make_config({{"optimizer.adam.amsgrad", "maybe"}}), UsageError);
  EXPECT_THROW(make_config({{"optimizer.rmsprop.rho", "1.5"}}), UsageError);
  EXPECT_THROW(make_config({{"segment.backend", "grabcut"}}), UsageError);
}

TEST(Config, RelativePathsResolveAgainstBase) {
  const auto c = make_config({{"work_dir", "../work"}, {"corpus.image_dir", "/abs/images"}}, "/etc/leafbg/configs");
  EXPECT_EQ(c.work_dir.lexically_normal(), std::filesystem::path("/etc/leafbg/work"));
  EXPECT_EQ(c.image_dir, std::filesystem::path("/abs/images"));
}

TEST(Config, SeedsFollowMasterUnlessSet) {
  const auto a = make_config({{"seed", "41"}});
  for (auto s : {a.seeds.balance, a.seeds.split, a.seeds.init, a.seeds.shuffle, a.seeds.synthetic}) {
    EXPECT_EQ(s, 41U);
  }
  EXPECT_EQ(a.backbone.init_seed, 41U);
  const auto b = make_config({{"seed", "41"}, {"seed.split", "5"}});
  EXPECT_EQ(b.seeds.split, 5U);
  EXPECT_EQ(b.seeds.balance, 41U);
  EXPECT_NE(a.digest(), b.digest());
}

TEST(Config, DigestIsStableAndSensitive) {
  const ConfigValues v{{"seed", "3"}, {"train.epochs", "4"}};
  EXPECT_EQ(make_config(v).digest(), make_config(v).digest());
  EXPECT_EQ(make_config(v).digest().size(), 64U);
  ConfigValues w = v;
  w["optimizer.adam.learning_rate"] = "1e-3";
  EXPECT_NE(make_config(w).digest(), make_config(v).digest());
  EXPECT_EQ(make_config(v).to_json().at("seeds").at("shuffle"), 3);
}

TEST(Config, EveryDocumentedKeyIsAccepted) {
  EXPECT_FALSE(config_keys().empty());
  for (const auto& [key, doc] : config_keys()) {
    EXPECT_FALSE(doc.empty()) << key;
    // accepted keys never raise "unknown config key"
    try {
      make_config({{key, "0"}});
    } catch (const UsageError& e) {
      EXPECT_EQ(std::string(e.what()).find("unknown config key"), std::string::npos) << key;
    }
  }
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"plant_pathology.cfg", "synthetic.cfg"}) {
    const auto path = std::filesystem::path(LEAFBG_SOURCE_DIR) / "configs" / name;
    const auto c = make_config(read_config_file(path), path.parent_path());
    EXPECT_TRUE(c.work_dir.is_absolute()) << name;
  }
  const auto full = std::filesystem::path(LEAFBG_SOURCE_DIR) / "configs/plant_pathology.cfg";
  const auto c = make_config(read_config_file(full), full.parent_path());
  EXPECT_EQ(c.optimizers.at(OptimizerKind::adam).beta_2, 0.99);
  EXPECT_EQ(c.optimizers.at(OptimizerKind::rmsprop).epsilon, 1e-9);
  EXPECT_EQ(c.backbone.kind, TrunkKind::onnx);
  EXPECT_EQ(c.seeds.split, 2023U);
}

}  // namespace
}  // namespace leafbg
