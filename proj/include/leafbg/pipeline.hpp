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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>

#include <nlohmann/json.hpp>

#include "leafbg/augmenter.hpp"
#include "leafbg/config.hpp"
#include "leafbg/error.hpp"
#include "leafbg/optimizer.hpp"

namespace leafbg {

/// Fixed layout of a work directory.
struct WorkLayout {
  std::filesystem::path root;

  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path manifests() const { return root / "manifests"; }
  std::filesystem::path split_manifest() const { return manifests() / "split.csv"; }
  std::filesystem::path val_manifest() const { return manifests() / "val.csv"; }
  std::filesystem::path test_manifest() const { return manifests() / "test.csv"; }
  std::filesystem::path segment() const { return root / "segment"; }
  std::filesystem::path masks() const { return segment() / "masks"; }
  std::filesystem::path segmented() const { return segment() / "fg"; }
  std::filesystem::path verdicts() const { return segment() / "verdicts.csv"; }
  std::filesystem::path datasets() const { return root / "datasets"; }
  std::filesystem::path dataset(DatasetName name) const;
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path report() const { return root / "report"; }
};

struct CommandOptions {
  bool force = false;
  bool resume = false;
  std::optional<std::size_t> synthetic;
  std::optional<BackendKind> backend;
  std::optional<DatasetName> dataset;
  std::optional<OptimizerKind> optimizer;
  /// Simulated interruption for resume testing; 0 disables.
  int stop_after_epoch = 0;
};

/// `provenance.json`: stage name, config digest, seeds and the full effective
/// configuration. No timestamps, so reruns reproduce it byte for byte.
void write_provenance(const std::filesystem::path& dir, const PipelineConfig& config, std::string_view stage,
                      const nlohmann::json& extra = nlohmann::json::object());

/// Each command prints progress to `out` and returns the process exit code.
/// Errors that stop a command outright are thrown as leafbg::Error.
ExitCode cmd_synth(const PipelineConfig& config, const CommandOptions& options, std::ostream& out);
ExitCode cmd_prepare(const PipelineConfig& config, const CommandOptions& options, std::ostream& out);
ExitCode cmd_segment(const PipelineConfig& config, const CommandOptions& options, std::ostream& out);
ExitCode cmd_train(const PipelineConfig& config, const CommandOptions& options, std::ostream& out);
ExitCode cmd_matrix(const PipelineConfig& config, const CommandOptions& options, std::ostream& out);
ExitCode cmd_evaluate(const PipelineConfig& config, const CommandOptions& options, std::ostream& out);

}  // namespace leafbg
