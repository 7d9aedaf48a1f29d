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

#include "leafbg/pipeline.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "leafbg/corpus.hpp"
#include "leafbg/csv.hpp"
#include "leafbg/digest.hpp"
#include "leafbg/evaluator.hpp"
#include "leafbg/io.hpp"
#include "leafbg/segmenter.hpp"
#include "leafbg/synthetic.hpp"
#include "leafbg/trainer.hpp"

namespace leafbg {

using json = nlohmann::json;
namespace fs = std::filesystem;

fs::path WorkLayout::dataset(DatasetName name) const {
  return datasets() / (std::string(to_string(name)) + ".csv");
}

void write_provenance(const fs::path& dir, const PipelineConfig& config, std::string_view stage, const json& extra) {
  const json cfg = config.to_json();
  json doc = {{"stage", std::string(stage)},
              {"config_digest", config.digest()},
              {"seeds", cfg.at("seeds")},
              {"config", cfg}};
  if (!extra.empty()) {
    doc["inputs"] = extra;
  }
  write_text_file(dir / "provenance.json", doc.dump(2) + "\n");
}

namespace {

template <typename... Args>
void say(std::ostream& out, fmt::format_string<Args...> format, Args&&... args) {
  out << fmt::format(format, std::forward<Args>(args)...) << '\n';
}

void require_file(const fs::path& path, std::string_view hint) {
  if (!fs::exists(path)) {
    throw DataError(fmt::format("missing {} ({}); {}", path.filename().string(), path.string(), hint));
  }
}

/// Label table and image directory, defaulting to a synthetic corpus in the work dir.
std::pair<fs::path, fs::path> corpus_paths(const PipelineConfig& config) {
  const WorkLayout layout{config.work_dir};
  fs::path table = config.label_table;
  fs::path images = config.image_dir;
  if (table.empty()) {
    table = synthetic::label_table_path(layout.corpus());
  }
  if (images.empty()) {
    images = config.label_table.empty() ? synthetic::image_dir(layout.corpus()) : table.parent_path() / "images";
  }
  return {table, images};
}

ClassifierModel make_model(const PipelineConfig& config) {
  return ClassifierModel(config.backbone, config.head, config.preprocess);
}

TrainConfig train_config(const PipelineConfig& config, DatasetName dataset, OptimizerKind kind) {
  TrainConfig t;
  t.epochs = config.epochs;
  t.batch_size = config.batch_size;
  t.shuffle_seed = config.seeds.shuffle;
  t.dataset = dataset;
  t.optimizer = config.optimizers.at(kind);
  return t;
}

TrainOutputs train_outputs(const PipelineConfig& config, const CommandOptions& options, std::ostream& out) {
  const WorkLayout layout{config.work_dir};
  TrainOutputs o;
  o.model_dir = layout.models();
  o.resume = options.resume;
  o.stop_after_epoch = options.stop_after_epoch;
  o.sidecar = {{"seeds", config.to_json().at("seeds")},
               {"pipeline_config_digest", config.digest()},
               {"val_manifest_digest", sha256_file(layout.val_manifest())}};
  o.on_epoch = [&out](const std::string& cell, const EpochRecord& r) {
    say(out, "  {} epoch {:>3}  loss {:.4f}  acc {:.4f}  val_loss {:.4f}  val_acc {:.4f}  ({:.1f}s)", cell,
        r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.seconds);
  };
  return o;
}

void print_corpus_summary(std::ostream& out, const CorpusSummary& s, std::string_view title) {
  say(out, "{}: {} images", title, s.total);
  for (Label l : kAllLabels) {
    const auto it = s.per_class_counts.find(l);
    say(out, "  {:<8} {}", to_string(l), it == s.per_class_counts.end() ? 0 : it->second);
  }
}

}  // namespace

ExitCode cmd_synth(const PipelineConfig& config, const CommandOptions& options, std::ostream& out) {
  const WorkLayout layout{config.work_dir};
  const std::size_t n = options.synthetic.value_or(60);
  if (n == 0) {
    throw UsageError("--synthetic must be at least 1");
  }
  const CorpusSummary s = synthetic::generate_corpus(n, config.seeds.synthetic, layout.corpus());
  write_provenance(layout.corpus(), config, "synth", {{"n_per_class", n}});
  print_corpus_summary(out, s, fmt::format("synthetic corpus at {}", layout.corpus().string()));
  return ExitCode::ok;
}

ExitCode cmd_prepare(const PipelineConfig& config, const CommandOptions& options, std::ostream& out) {
  const WorkLayout layout{config.work_dir};
  if (options.synthetic) {
    cmd_synth(config, options, out);
  }
  const auto [table, images] = options.synthetic
                                   ? std::pair{synthetic::label_table_path(layout.corpus()),
                                               synthetic::image_dir(layout.corpus())}
                                   : corpus_paths(config);
  if (!fs::exists(table)) {
    throw UsageError("label table not found: " + table.string() +
                     " (set corpus.label_table or pass --synthetic <n>)");
  }
  if (!fs::is_directory(images)) {
    throw UsageError("image directory not found: " + images.string());
  }

  const IngestResult ingested = ingest(table, images);
  print_corpus_summary(out, ingested.summary, "ingested");
  say(out, "  dropped (multiple_diseases) {}", ingested.summary.dropped);

  const auto balanced = leafbg::balance(ingested.records, config.seeds.balance);
  print_corpus_summary(out, summarize(balanced, config.seeds.balance), "balanced");

  const SplitManifest manifest = leafbg::split(balanced, config.ratios, config.seeds.split);
  write_split_manifest(manifest, layout.split_manifest());
  write_dataset_manifest(raw_partition(manifest, Split::val), layout.val_manifest());
  write_dataset_manifest(raw_partition(manifest, Split::test), layout.test_manifest());
  const json inputs = {{"label_table", table.string()},
                       {"label_table_digest", sha256_file(table)},
                       {"image_dir", images.string()}};
  write_provenance(layout.manifests(), config, "prepare", inputs);

  const DatasetManifest d1 = build_dataset_1(manifest);
  write_dataset_manifest(d1, layout.dataset(DatasetName::dataset_1));
  write_provenance(layout.datasets(), config, "prepare", inputs);

  say(out, "split (train/val/test) per class:");
  std::size_t train_total = 0;
  for (const auto& [label, c] : manifest.per_class_split_counts) {
    say(out, "  {:<8} {}/{}/{}", to_string(label), c.train, c.val, c.test);
    train_total += c.train;
  }
  say(out, "total {}, train {}", manifest.records.size(), train_total);
  say(out, "wrote {}", layout.split_manifest().string());
  return ExitCode::ok;
}

ExitCode cmd_segment(const PipelineConfig& config, const CommandOptions& options, std::ostream& out) {
  const WorkLayout layout{config.work_dir};
  require_file(layout.split_manifest(), "run prepare first");

  SegmenterBackendId backend{options.backend.value_or(config.segment_backend), std::nullopt};
  if (backend.kind == BackendKind::salient_model) {
    if (config.saliency_model.empty()) {
      throw UsageError("the salient backend needs segment.model in the config");
    }
    backend.model_path = config.saliency_model;
  }
  // Loads the saliency network before any output is touched.
  Segmenter segmenter(backend, config.segment_threshold);
  const std::set<std::string> manual =
      config.manual_rejects.empty() ? std::set<std::string>{} : read_reject_list(config.manual_rejects);

  const SplitManifest manifest = read_split_manifest(layout.split_manifest());
  std::map<std::string, GateVerdict> verdicts;
  std::vector<std::vector<std::string>> rows;
  std::map<Label, std::pair<std::size_t, std::size_t>> per_class;  // (train, rejected)
  std::size_t computed = 0;
  for (const auto& r : manifest.partition(Split::train)) {
    const fs::path mask_file = layout.masks() / mask_file_name(r.image_id);
    const fs::path fg_file = layout.segmented() / segmented_file_name(r.image_id);
    ForegroundMask mask;
    if (!options.force && fs::exists(mask_file) && fs::exists(fg_file)) {
      mask = read_mask_png(mask_file, r.image_id);
    } else {
      const cv::Mat image = read_color_image(r.path);
      mask = segmenter.segment(image, r.image_id);
      write_mask_png(mask, mask_file);
      write_image(fg_file, apply_mask(image, mask));
      ++computed;
    }
    const GateVerdict verdict = gate(mask, config.gate_bounds, manual);
    std::string reasons;
    for (GateReason reason : verdict.reasons) {
      reasons += (reasons.empty() ? "" : ";") + std::string(to_string(reason));
    }
    rows.push_back({r.image_id, fmt::format("{:.6f}", mask.foreground_fraction()),
                    verdict.accepted() ? "1" : "0", reasons});
    auto& counts = per_class[r.label];
    ++counts.first;
    counts.second += verdict.accepted() ? 0 : 1;
    verdicts.emplace(r.image_id, verdict);
  }
  csv::write(layout.verdicts(), {"image_id", "fraction", "accepted", "reasons"}, rows);
  write_provenance(layout.segment(), config, "segment",
                   {{"backend", std::string(to_string(backend.kind))},
                    {"split_manifest_digest", sha256_file(layout.split_manifest())}});

  const DatasetManifest d2 = build_dataset_2(manifest, verdicts, layout.segmented());
  write_dataset_manifest(d2, layout.dataset(DatasetName::dataset_2));
  write_provenance(layout.datasets(), config, "segment",
                   {{"split_manifest_digest", sha256_file(layout.split_manifest())},
                    {"verdicts_digest", sha256_file(layout.verdicts())}});

  say(out, "segmented {} train images ({} computed, {} reused), backend {}", rows.size(), computed,
      rows.size() - computed, to_string(backend.kind));
  say(out, "{:<8} {:>6} {:>9} {:>9}", "class", "train", "rejected", "added");
  std::size_t total_rejected = 0;
  for (const auto& [label, counts] : per_class) {
    say(out, "{:<8} {:>6} {:>9} {:>9}", to_string(label), counts.first, counts.second, counts.first - counts.second);
    total_rejected += counts.second;
  }
  say(out, "{:<8} {:>6} {:>9} {:>9}", "total", rows.size(), total_rejected, rows.size() - total_rejected);
  say(out, "dataset_2: {} entries", d2.size());
  return ExitCode::ok;
}

ExitCode cmd_train(const PipelineConfig& config, const CommandOptions& options, std::ostream& out) {
  if (!options.dataset || !options.optimizer) {
    throw UsageError("train needs --dataset 1|2 and --optimizer adam|rmsprop");
  }
  const WorkLayout layout{config.work_dir};
  const fs::path data_path = layout.dataset(*options.dataset);
  require_file(data_path, *options.dataset == DatasetName::dataset_1 ? "run prepare first" : "run segment first");
  require_file(layout.val_manifest(), "run prepare first");
  const DatasetManifest data = read_dataset_manifest(data_path);
  const DatasetManifest val = read_dataset_manifest(layout.val_manifest());

  ClassifierModel model = make_model(config);
  TrainOutputs outputs = train_outputs(config, options, out);
  outputs.sidecar["dataset_manifest_digest"] = sha256_file(data_path);
  const TrainConfig tc = train_config(config, *options.dataset, *options.optimizer);
  say(out, "training {} on {} entries", cell_name(tc.dataset, tc.optimizer.kind), data.size());
  const TrainLog log = train(model, data, val, tc, outputs);
  write_provenance(layout.models(), config, "train");
  say(out, "best val_acc {:.4f} at epoch {}; checkpoint {}", log.best_val_acc, log.best_epoch,
      log.best_checkpoint.string());
  return ExitCode::ok;
}

ExitCode cmd_matrix(const PipelineConfig& config, const CommandOptions& options, std::ostream& out) {
  const WorkLayout layout{config.work_dir};
  require_file(layout.dataset(DatasetName::dataset_1), "run prepare first");
  require_file(layout.dataset(DatasetName::dataset_2), "run segment first");
  require_file(layout.val_manifest(), "run prepare first");
  const DatasetManifest d1 = read_dataset_manifest(layout.dataset(DatasetName::dataset_1));
  const DatasetManifest d2 = read_dataset_manifest(layout.dataset(DatasetName::dataset_2));
  const DatasetManifest val = read_dataset_manifest(layout.val_manifest());

  TrainConfig base = train_config(config, DatasetName::dataset_1, OptimizerKind::adam);
  TrainOutputs outputs = train_outputs(config, options, out);
  outputs.sidecar["dataset_manifest_digests"] = {
      {"dataset_1", sha256_file(layout.dataset(DatasetName::dataset_1))},
      {"dataset_2", sha256_file(layout.dataset(DatasetName::dataset_2))}};
  say(out, "matrix: dataset_1 {} entries, dataset_2 {} entries, val {} entries", d1.size(), d2.size(), val.size());
  const auto outcomes =
      run_matrix([&config] { return make_model(config); }, d1, d2, val, base, config.optimizers, outputs);
  write_provenance(layout.models(), config, "matrix");

  ExitCode code = ExitCode::ok;
  for (const auto& o : outcomes) {
    const std::string cell = cell_name(o.dataset, o.optimizer);
    if (o.log) {
      say(out, "{}: best val_acc {:.4f} (epoch {})", cell, o.log->best_val_acc, o.log->best_epoch);
    } else {
      say(out, "{}: FAILED: {}", cell, o.error);
      if (code == ExitCode::ok) {
        code = o.exit_code;
      }
    }
  }
  return code;
}

ExitCode cmd_evaluate(const PipelineConfig& config, const CommandOptions&, std::ostream& out) {
  const WorkLayout layout{config.work_dir};
  require_file(layout.test_manifest(), "run prepare first");
  const DatasetManifest test = read_dataset_manifest(layout.test_manifest());
  const std::string test_digest = sha256_file(layout.test_manifest());
  std::vector<int> truth;
  for (const auto& e : test.entries) {
    truth.push_back(static_cast<int>(index_of(e.label)));
  }

  std::vector<CellResult> cells;
  std::vector<std::string> missing;
  for (DatasetName d : {DatasetName::dataset_1, DatasetName::dataset_2}) {
    for (OptimizerKind k : {OptimizerKind::adam, OptimizerKind::rmsprop}) {
      const std::string cell = cell_name(d, k);
      const fs::path ckpt = best_checkpoint_path(layout.models(), cell);
      if (!fs::exists(ckpt)) {
        missing.push_back(cell);
        continue;
      }
      ClassifierModel model = ClassifierModel::load(ckpt);
      FeatureCache cache;
      cache.fill(model, test);
      const EvalResult eval = evaluate_staged(model, test, cache, config.batch_size);
      CellResult result;
      result.dataset = d;
      result.optimizer = k;
      result.confusion = confusion(std::span<const int>(truth), std::span<const int>(eval.predictions));
      result.metrics = metrics(result.confusion);
      const json meta = read_archive(ckpt).meta;
      result.config_digest = meta.value("extra", json::object()).value("config_digest", std::string());
      result.test_manifest_digest = test_digest;
      cells.push_back(std::move(result));
    }
  }
  if (cells.empty()) {
    throw DataError("no checkpoints found in " + layout.models().string() + "; run matrix or train first");
  }

  const ComparisonReport report = build_report(std::move(cells));
  write_report(report, layout.report());
  write_provenance(layout.report(), config, "evaluate", {{"test_manifest_digest", test_digest}});

  say(out, "test set: {} raw images", test.size());
  say(out, "{:<20} {:>9} {:>10} {:>8} {:>8}", "cell", "accuracy", "precision", "recall", "f1");
  for (const auto& c : report.cells) {
    say(out, "{:<20} {:>8.2f}% {:>9.2f}% {:>7.2f}% {:>7.2f}%", c.name(), 100 * c.metrics.accuracy,
        100 * c.metrics.weighted.precision, 100 * c.metrics.weighted.recall, 100 * c.metrics.weighted.f1);
  }
  for (const auto& [kind, delta] : report.delta_accuracy) {
    say(out, "delta accuracy ({}): dataset_2 - dataset_1 = {:+.2f} points", to_string(kind), 100 * delta);
  }
  say(out, "report written to {}", layout.report().string());
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) {
      list += (list.empty() ? "" : ", ") + m;
    }
    say(out, "missing checkpoints: {}", list);
    return ExitCode::data;
  }
  return ExitCode::ok;
}

}  // namespace leafbg
