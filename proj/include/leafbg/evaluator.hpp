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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "leafbg/augmenter.hpp"
#include "leafbg/labels.hpp"
#include "leafbg/optimizer.hpp"

namespace leafbg {

/// Rows are true classes, columns predicted classes, in kAllLabels order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> cells{};

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t k) const;
  std::uint64_t column_sum(std::size_t k) const;
  std::uint64_t tp(std::size_t k) const { return cells[k][k]; }
  std::uint64_t fp(std::size_t k) const { return column_sum(k) - tp(k); }
  std::uint64_t fn(std::size_t k) const { return row_sum(k) - tp(k); }
  std::uint64_t tn(std::size_t k) const { return total() - tp(k) - fp(k) - fn(k); }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const Label> truth, std::span<const Label> predicted);
/// Class indices; throws UsageError on lengths that differ or indices outside [0, 3).
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  /// Set when the corresponding denominator was zero and the metric was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct AveragedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const AveragedMetrics&, const AveragedMetrics&) = default;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
  AveragedMetrics weighted;
  AveragedMetrics macro;
  std::vector<std::string> warnings;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// accuracy = trace / total; per class P = TP/(TP+FP), R = TP/(TP+FN),
/// F1 = 2PR/(P+R); weighted averages use row sums as weights, macro averages
/// are plain means. Zero denominators give 0 and a warning. Throws DataError
/// on an empty matrix.
MetricsReport metrics(const ConfusionMatrix& cm);

struct CellResult {
  DatasetName dataset = DatasetName::dataset_1;
  OptimizerKind optimizer = OptimizerKind::adam;
  ConfusionMatrix confusion;
  MetricsReport metrics;
  std::string config_digest;
  std::string test_manifest_digest;

  std::string name() const;
  friend bool operator==(const CellResult&, const CellResult&) = default;
};

struct ComparisonReport {
  std::vector<CellResult> cells;
  std::string test_manifest_digest;
  /// accuracy(dataset_2) - accuracy(dataset_1), per optimizer with both cells present.
  std::map<OptimizerKind, double> delta_accuracy;

  friend bool operator==(const ComparisonReport&, const ComparisonReport&) = default;
};

/// Throws DataError when the cells were evaluated on different test manifests.
ComparisonReport build_report(std::vector<CellResult> cells);

nlohmann::json to_json(const ComparisonReport& report);
ComparisonReport report_from_json(const nlohmann::json& j);

/// Plain-text matrix with class names and per-class metrics.
std::string render_confusion_text(const CellResult& cell);
/// Annotated heat map of the matrix, rows true and columns predicted.
cv::Mat render_confusion_image(const CellResult& cell);

/// Writes report.json, summary.csv and confusion_<cell>.{png,txt} into `out_dir`.
void write_report(const ComparisonReport& report, const std::filesystem::path& out_dir);

}  // namespace leafbg
