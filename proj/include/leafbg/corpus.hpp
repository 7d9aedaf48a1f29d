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
#include <span>
#include <string>
#include <vector>

#include "leafbg/labels.hpp"

namespace leafbg {

struct LabeledImageRecord {
  std::string image_id;
  std::filesystem::path path;
  Label label = Label::healthy;
  Split split = Split::unassigned;

  friend bool operator==(const LabeledImageRecord&, const LabeledImageRecord&) = default;
};

struct CorpusSummary {
  std::map<Label, std::size_t> per_class_counts;
  std::size_t total = 0;
  std::uint64_t seed = 0;
  /// Rows of the label table that were not retained (multiple_diseases).
  std::size_t dropped = 0;

  friend bool operator==(const CorpusSummary&, const CorpusSummary&) = default;
};

CorpusSummary summarize(std::span<const LabeledImageRecord> records, std::uint64_t seed = 0);

struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Train/val/test proportions. Must sum to exactly one.
struct SplitRatios {
  Ratio train{3, 5};
  Ratio val{1, 5};
  Ratio test{1, 5};

  /// Builds ratios from integer weights, e.g. 6:2:2.
  static SplitRatios from_weights(std::int64_t train, std::int64_t val, std::int64_t test);
  /// Throws UsageError if any ratio is negative, has a non-positive denominator,
  /// or the three do not sum to one.
  void validate() const;

  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

struct ClassSplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + val + test; }
  friend bool operator==(const ClassSplitCounts&, const ClassSplitCounts&) = default;
};

/// val = floor(val_ratio * n), test = floor(test_ratio * n), train takes the remainder.
ClassSplitCounts split_counts(std::size_t n, const SplitRatios& ratios);

struct SplitManifest {
  std::vector<LabeledImageRecord> records;
  SplitRatios ratios;
  std::uint64_t seed = 0;
  std::map<Label, ClassSplitCounts> per_class_split_counts;

  std::vector<LabeledImageRecord> partition(Split which) const;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

struct IngestResult {
  CorpusSummary summary;
  std::vector<LabeledImageRecord> records;
};

/// Reads a one-hot label table (image_id,healthy,multiple_diseases,rust,scab) and
/// resolves `<image_dir>/<image_id>.{jpg,jpeg,png}`. multiple_diseases rows are
/// dropped and counted. Throws DataError listing every missing image, or naming
/// the first row whose one-hot encoding is not exactly one label.
IngestResult ingest(const std::filesystem::path& label_table, const std::filesystem::path& image_dir);

/// Downsamples every class to the smallest class count. The kept subset of each
/// class is a seeded uniform draw without replacement; output preserves input order.
std::vector<LabeledImageRecord> balance(std::span<const LabeledImageRecord> records,
                                        std::uint64_t seed);

/// Stratified split with a seeded permutation per class. Output keeps the input
/// order; only the split field changes.
SplitManifest split(std::span<const LabeledImageRecord> records, const SplitRatios& ratios,
                    std::uint64_t seed);

/// Manifest persistence: `<stem>.csv` (image_id,path,label,split) plus
/// `<stem>.meta.json` holding ratios, seed and per-class counts.
void write_split_manifest(const SplitManifest& manifest, const std::filesystem::path& csv_path);
SplitManifest read_split_manifest(const std::filesystem::path& csv_path);

/// Writes a one-hot label table in the PlantPathology layout.
void write_label_table(const std::filesystem::path& path,
                       std::span<const LabeledImageRecord> records);

}  // namespace leafbg
