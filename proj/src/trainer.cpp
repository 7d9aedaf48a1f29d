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

#include "leafbg/trainer.hpp"

#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "leafbg/archive.hpp"
#include "leafbg/csv.hpp"
#include "leafbg/digest.hpp"
#include "leafbg/error.hpp"
#include "leafbg/io.hpp"

namespace leafbg {

using json = nlohmann::json;
namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) {
    throw UsageError("epochs must be at least 1");
  }
  if (batch_size < 1) {
    throw UsageError("batch_size must be at least 1");
  }
  optimizer.validate();
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"loss", "categorical_crossentropy"},
          {"shuffle_seed", c.shuffle_seed},
          {"dataset", std::string(to_string(c.dataset))},
          {"optimizer", to_json(c.optimizer)}};
}

namespace {

const std::vector<std::string> kLogHeader{"epoch", "train_loss", "train_acc", "val_loss", "val_acc", "seconds"};

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},       {"train_loss", r.train_loss}, {"train_acc", r.train_acc},
          {"val_loss", r.val_loss}, {"val_acc", r.val_acc},       {"seconds", r.seconds}};
}

EpochRecord epoch_from_json(const json& j) {
  return {j.at("epoch").get<int>(),      j.at("train_loss").get<double>(), j.at("train_acc").get<double>(),
          j.at("val_loss").get<double>(), j.at("val_acc").get<double>(),    j.at("seconds").get<double>()};
}

double parse_number(const std::string& text, const fs::path& source) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) {
      return v;
    }
  } catch (const std::exception&) {
  }
  throw DataError(fmt::format("{}: '{}' is not a number", source.string(), text));
}

std::vector<int> label_indices(const DatasetManifest& manifest) {
  std::vector<int> labels;
  labels.reserve(manifest.size());
  for (const auto& e : manifest.entries) {
    labels.push_back(static_cast<int>(index_of(e.label)));
  }
  return labels;
}

/// Tag shared by training-state checks: everything except the epoch count.
json resume_identity(const TrainConfig& config, const ClassifierModel& model) {
  json j = to_json(config);
  j.erase("epochs");
  j["model"] = model.describe();
  return j;
}

void save_state(const fs::path& path, ClassifierModel& model, const Optimizer& optimizer, const TrainLog& log,
                const json& identity) {
  TensorArchive archive;
  for (auto* p : model.parameters()) {
    archive.tensors["model." + p->name] =
        Tensor{p->shape, std::vector<double>(p->value.data(), p->value.data() + p->size())};
  }
  optimizer.save_state(archive);
  json rows = json::array();
  for (const auto& r : log.epochs) {
    rows.push_back(to_json(r));
  }
  archive.meta["identity"] = identity;
  archive.meta["log"] = rows;
  archive.meta["best_epoch"] = log.best_epoch;
  archive.meta["best_val_acc"] = log.best_val_acc;
  write_archive(path, archive, StoragePrecision::f64);
}

void load_state(const fs::path& path, ClassifierModel& model, Optimizer& optimizer, TrainLog& log,
                const json& identity) {
  const TensorArchive archive = read_archive(path);
  if (archive.meta.value("identity", json()) != identity) {
    throw UsageError("resume state " + path.string() +
                     " was written with a different configuration; rerun without --resume");
  }
  TensorArchive params;
  for (const auto& [name, tensor] : archive.tensors) {
    if (name.rfind("model.", 0) == 0) {
      params.tensors[name.substr(6)] = tensor;
    }
  }
  model.load_parameters(params);
  optimizer.load_state(archive);
  log.epochs.clear();
  for (const auto& row : archive.meta.at("log")) {
    log.epochs.push_back(epoch_from_json(row));
  }
  log.best_epoch = archive.meta.at("best_epoch").get<int>();
  log.best_val_acc = archive.meta.at("best_val_acc").get<double>();
}

}  // namespace

void write_train_log(const TrainLog& log, const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : log.epochs) {
    rows.push_back({std::to_string(r.epoch), fmt::format("{:.10f}", r.train_loss), fmt::format("{:.6f}", r.train_acc),
                    fmt::format("{:.10f}", r.val_loss), fmt::format("{:.6f}", r.val_acc),
                    fmt::format("{:.3f}", r.seconds)});
  }
  csv::write(path, kLogHeader, rows);
}

std::vector<EpochRecord> read_train_log(const fs::path& path) {
  const csv::Table table = csv::read(path);
  csv::require_header(table, kLogHeader, path.string());
  std::vector<EpochRecord> out;
  for (const auto& row : table.rows) {
    EpochRecord r;
    r.epoch = static_cast<int>(parse_number(row[0], path));
    r.train_loss = parse_number(row[1], path);
    r.train_acc = parse_number(row[2], path);
    r.val_loss = parse_number(row[3], path);
    r.val_acc = parse_number(row[4], path);
    r.seconds = parse_number(row[5], path);
    out.push_back(r);
  }
  return out;
}

std::string cell_name(DatasetName dataset, OptimizerKind optimizer) {
  return fmt::format("{}_{}", to_string(dataset), to_string(optimizer));
}

fs::path best_checkpoint_path(const fs::path& model_dir, const std::string& cell) {
  return model_dir / ("model_" + cell + ".ckpt");
}
fs::path final_checkpoint_path(const fs::path& model_dir, const std::string& cell) {
  return model_dir / ("final_" + cell + ".ckpt");
}
fs::path train_log_path(const fs::path& model_dir, const std::string& cell) {
  return model_dir / ("train_log_" + cell + ".csv");
}
fs::path state_path(const fs::path& model_dir, const std::string& cell) {
  return model_dir / "state" / (cell + ".state");
}

void FeatureCache::fill(ClassifierModel& model, const DatasetManifest& manifest) {
  for (const auto& e : manifest.entries) {
    const std::string key = e.path.string();
    if (features_.contains(key)) {
      continue;
    }
    features_.emplace(key, model.stage(read_color_image(e.path)));
  }
}

const FeatureMap& FeatureCache::at(const fs::path& path) const {
  const auto it = features_.find(path.string());
  if (it == features_.end()) {
    throw UsageError("no staged features for " + path.string());
  }
  return it->second;
}

EvalResult evaluate_staged(const ClassifierModel& model, const DatasetManifest& manifest,
                           const FeatureCache& cache, int batch_size) {
  if (manifest.entries.empty()) {
    throw DataError("cannot evaluate an empty manifest");
  }
  const std::vector<int> labels = label_indices(manifest);
  EvalResult result;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  const auto step = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < manifest.size(); start += step) {
    const std::size_t end = std::min(manifest.size(), start + step);
    std::vector<const FeatureMap*> batch;
    std::vector<int> batch_labels(labels.begin() + static_cast<std::ptrdiff_t>(start),
                                  labels.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(&cache.at(manifest.entries[i].path));
    }
    const nn::Matrix logits = model.logits_staged(batch);
    loss_sum += nn::cross_entropy(logits, batch_labels) * static_cast<double>(end - start);
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index predicted = 0;
      logits.row(r).maxCoeff(&predicted);
      result.predictions.push_back(static_cast<int>(predicted));
      if (predicted == batch_labels[static_cast<std::size_t>(r)]) {
        ++correct;
      }
    }
  }
  const auto n = static_cast<double>(manifest.size());
  result.loss = loss_sum / n;
  result.accuracy = static_cast<double>(correct) / n;
  return result;
}

TrainLog train(ClassifierModel& model, const DatasetManifest& train_manifest, const DatasetManifest& val_manifest,
               const TrainConfig& config, const TrainOutputs& outputs, FeatureCache* cache) {
  config.validate();
  if (train_manifest.entries.empty() || val_manifest.entries.empty()) {
    throw DataError("training and validation manifests must be non-empty");
  }
  FeatureCache local_cache;
  FeatureCache& features = cache != nullptr ? *cache : local_cache;
  features.fill(model, train_manifest);
  features.fill(model, val_manifest);

  const std::string cell = cell_name(config.dataset, config.optimizer.kind);
  const json identity = resume_identity(config, model);
  const json train_json = to_json(config);
  const std::string config_digest =
      sha256_hex(json{{"model", model.describe()}, {"train", train_json}}.dump());

  std::unique_ptr<Optimizer> optimizer = make_optimizer(config.optimizer);
  TrainLog log;
  log.best_checkpoint = best_checkpoint_path(outputs.model_dir, cell);
  log.final_checkpoint = final_checkpoint_path(outputs.model_dir, cell);
  const fs::path state_file = state_path(outputs.model_dir, cell);
  if (outputs.resume && fs::exists(state_file)) {
    load_state(state_file, model, *optimizer, log, identity);
  }

  json meta = outputs.sidecar;
  meta["cell"] = cell;
  meta["train"] = train_json;
  meta["config_digest"] = config_digest;

  const std::vector<int> labels = label_indices(train_manifest);
  const std::uint64_t epoch_seed = derive_seed(config.shuffle_seed, "epoch");
  const std::uint64_t dropout_seed = derive_seed(config.shuffle_seed, "dropout");
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  const std::vector<nn::Parameter*> trainable = model.trainable_parameters();

  for (int epoch = static_cast<int>(log.epochs.size()) + 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng order_rng(derive_seed(epoch_seed, static_cast<std::uint64_t>(epoch)));
    const std::vector<std::size_t> order = order_rng.permutation(train_manifest.size());

    double loss_sum = 0.0;
    std::size_t correct = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<const FeatureMap*> batch;
      std::vector<int> batch_labels;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&features.at(train_manifest.entries[order[i]].path));
        batch_labels.push_back(labels[order[i]]);
      }
      Rng dropout_rng(derive_seed(derive_seed(dropout_seed, static_cast<std::uint64_t>(epoch)),
                                  static_cast<std::uint64_t>(batch_index)));
      const auto step = model.forward_backward(batch, batch_labels, dropout_rng);
      if (!std::isfinite(step.loss)) {
        throw RuntimeFailure(
            fmt::format("non-finite loss in cell {} at epoch {}, batch {}", cell, epoch, batch_index));
      }
      optimizer->step(trainable);
      loss_sum += step.loss * static_cast<double>(end - start);
      correct += step.correct;
    }

    const EvalResult val = evaluate_staged(model, val_manifest, features, config.batch_size);
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(order.size());
    record.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    record.val_loss = val.loss;
    record.val_acc = val.accuracy;
    if (!std::isfinite(record.val_loss)) {
      throw RuntimeFailure(fmt::format("non-finite validation loss in cell {} at epoch {}", cell, epoch));
    }

    if (record.val_acc > log.best_val_acc) {
      log.best_val_acc = record.val_acc;
      log.best_epoch = epoch;
      json best_meta = meta;
      best_meta["best_epoch"] = epoch;
      best_meta["best_val_acc"] = record.val_acc;
      model.save(log.best_checkpoint, best_meta);
      json sidecar = model.describe();
      sidecar.update(best_meta);
      write_text_file(fs::path(log.best_checkpoint).replace_extension(".json"), sidecar.dump(2) + "\n");
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log.epochs.push_back(record);

    write_train_log(log, train_log_path(outputs.model_dir, cell));
    save_state(state_file, model, *optimizer, log, identity);
    if (outputs.on_epoch) {
      outputs.on_epoch(cell, record);
    }
    if (outputs.stop_after_epoch > 0 && epoch >= outputs.stop_after_epoch && epoch < config.epochs) {
      return log;
    }
  }

  json final_meta = meta;
  final_meta["epochs_completed"] = static_cast<int>(log.epochs.size());
  model.save(log.final_checkpoint, final_meta);
  write_train_log(log, train_log_path(outputs.model_dir, cell));
  return log;
}

std::vector<CellOutcome> run_matrix(const std::function<ClassifierModel()>& make_model,
                                    const DatasetManifest& dataset_1, const DatasetManifest& dataset_2,
                                    const DatasetManifest& val_manifest, const TrainConfig& base,
                                    const std::map<OptimizerKind, OptimizerConfig>& optimizers,
                                    const TrainOutputs& outputs) {
  std::vector<CellOutcome> outcomes;
  FeatureCache cache;
  for (const DatasetManifest* data : {&dataset_1, &dataset_2}) {
    for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::rmsprop}) {
      CellOutcome outcome;
      outcome.dataset = data->name;
      outcome.optimizer = kind;
      try {
        TrainConfig config = base;
        config.dataset = data->name;
        const auto it = optimizers.find(kind);
        config.optimizer = it != optimizers.end() ? it->second : default_optimizer(kind);
        ClassifierModel model = make_model();
        outcome.log = train(model, *data, val_manifest, config, outputs, &cache);
      } catch (const Error& e) {
        outcome.error = e.what();
        outcome.exit_code = e.code();
      } catch (const std::exception& e) {
        outcome.error = e.what();
        outcome.exit_code = ExitCode::runtime;
      }
      outcomes.push_back(std::move(outcome));
    }
  }
  return outcomes;
}

}  // namespace leafbg
