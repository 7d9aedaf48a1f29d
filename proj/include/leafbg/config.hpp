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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "leafbg/backbone.hpp"
#include "leafbg/corpus.hpp"
#include "leafbg/model.hpp"
#include "leafbg/optimizer.hpp"
#include "leafbg/preprocess.hpp"
#include "leafbg/segmenter.hpp"

namespace leafbg {

/// Raw `key = value` pairs. `#` starts a comment; blank lines are ignored.
using ConfigValues = std::map<std::string, std::string>;

ConfigValues parse_config_text(std::string_view text, std::string_view source = "<config>");
ConfigValues read_config_file(const std::filesystem::path& path);

struct Seeds {
  std::uint64_t master = 0;
  std::uint64_t balance = 0;
  std::uint64_t split = 0;
  std::uint64_t init = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t synthetic = 0;
};

struct PipelineConfig {
  std::filesystem::path work_dir = "work";
  std::filesystem::path label_table;
  std::filesystem::path image_dir;

  Seeds seeds;
  SplitRatios ratios;

  BackendKind segment_backend = BackendKind::color_index_baseline;
  std::filesystem::path saliency_model;
  double segment_threshold = 0.5;
  GateBounds gate_bounds;
  std::filesystem::path manual_rejects;

  PreprocessSpec preprocess;
  BackboneSpec backbone;
  HeadSpec head;

  int epochs = 50;
  int batch_size = 16;
  std::map<OptimizerKind, OptimizerConfig> optimizers{
      {OptimizerKind::adam, default_optimizer(OptimizerKind::adam)},
      {OptimizerKind::rmsprop, default_optimizer(OptimizerKind::rmsprop)}};

  /// Every effective setting (paths as given after resolution, derived seeds
  /// filled in). Its digest identifies a configuration in provenance files.
  nlohmann::json to_json() const;
  std::string digest() const;
};

/// Builds a configuration from defaults, then `values`. Relative paths resolve
/// against `base_dir`. Seeds not given explicitly derive from `seed`.
/// Unknown keys and malformed values raise UsageError.
PipelineConfig make_config(const ConfigValues& values, const std::filesystem::path& base_dir = {});

/// The keys make_config accepts, with a one-line description each.
const std::map<std::string, std::string>& config_keys();

}  // namespace leafbg
