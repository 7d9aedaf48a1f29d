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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leafbg/augmenter.hpp"
#include "leafbg/error.hpp"
#include "leafbg/model.hpp"
#include "leafbg/optimizer.hpp"

namespace leafbg {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  std::uint64_t shuffle_seed = 0;
  DatasetName dataset = DatasetName::dataset_1;
  OptimizerConfig optimizer;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
  int best_epoch = 0;
  double best_val_acc = -1.0;
};

/// CSV `epoch,train_loss,train_acc,val_loss,val_acc,seconds`.
void write_train_log(const TrainLog& log, const std::filesystem::path& path);
std::vector<EpochRecord> read_train_log(const std::filesystem::path& path);

/// "dataset_1_adam" etc.; used in every per-cell file name.
std::string cell_name(DatasetName dataset, OptimizerKind optimizer);

/// Where a run writes. File names inside `model_dir`:
///   model_<cell>.ckpt (+ .json)   best validation accuracy
///   final_<cell>.ckpt             weights after the last epoch
///   train_log_<cell>.csv
///   state/<cell>.state            resume point, rewritten after every epoch
struct TrainOutputs {
  std::filesystem::path model_dir;
  bool resume = false;
  /// Stop (as if interrupted) once this many epochs are complete; 0 disables.
  int stop_after_epoch = 0;
  /// Merged into the checkpoint sidecar (seeds, manifest digests, ...).
  nlohmann::json sidecar = nlohmann::json::object();
  /// Called after every completed epoch.
  std::function<void(const std::string& cell, const EpochRecord&)> on_epoch;
};

std::filesystem::path best_checkpoint_path(const std::filesystem::path& model_dir, const std::string& cell);
std::filesystem::path final_checkpoint_path(const std::filesystem::path& model_dir, const std::string& cell);
std::filesystem::path train_log_path(const std::filesystem::path& model_dir, const std::string& cell);
std::filesystem::path state_path(const std::filesystem::path& model_dir, const std::string& cell);

/// Staged (frozen-part) features keyed by image path. Valid for every model
/// built from the same backbone spec and init seed, so matrix cells share one.
class FeatureCache {
 public:
  /// Reads, preprocesses and stages every entry not cached yet. Unreadable
  /// images raise DataError naming the path.
  void fill(ClassifierModel& model, const DatasetManifest& manifest);
  const FeatureMap& at(const std::filesystem::path& path) const;
  std::size_t size() const { return features_.size(); }

 private:
  std::map<std::string, FeatureMap> features_;
};

/// Mean cross-entropy and accuracy of inference-mode predictions.
struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
};
EvalResult evaluate_staged(const ClassifierModel& model, const DatasetManifest& manifest,
                           const FeatureCache& cache, int batch_size);

/// Trains for config.epochs epochs (continuing from the saved state when
/// outputs.resume is set and a state file exists). Each epoch visits the
/// training manifest in a permutation seeded by (shuffle_seed, epoch), keeping
/// a partial final batch. A non-finite loss raises RuntimeFailure naming the
/// epoch and batch.
TrainLog train(ClassifierModel& model, const DatasetManifest& train_manifest,
               const DatasetManifest& val_manifest, const TrainConfig& config, const TrainOutputs& outputs,
               FeatureCache* cache = nullptr);

struct CellOutcome {
  DatasetName dataset = DatasetName::dataset_1;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::optional<TrainLog> log;
  std::string error;
  ExitCode exit_code = ExitCode::ok;
};

/// The four cells in order dataset_1/adam, dataset_1/rmsprop, dataset_2/adam,
/// dataset_2/rmsprop. `make_model` must return identically initialised models.
/// A failing cell is recorded and the remaining cells still run.
std::vector<CellOutcome> run_matrix(const std::function<ClassifierModel()>& make_model,
                                    const DatasetManifest& dataset_1, const DatasetManifest& dataset_2,
                                    const DatasetManifest& val_manifest, const TrainConfig& base,
                                    const std::map<OptimizerKind, OptimizerConfig>& optimizers,
                                    const TrainOutputs& outputs);

}  // namespace leafbg
