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

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "leafbg/corpus.hpp"
#include "leafbg/labels.hpp"
#include "leafbg/segmenter.hpp"

namespace leafbg {

enum class DatasetName { dataset_1, dataset_2 };
enum class Variant { raw, background_removed };

std::string_view to_string(DatasetName name) noexcept;
DatasetName parse_dataset_name(std::string_view text);
std::string_view to_string(Variant variant) noexcept;
Variant parse_variant(std::string_view text);

struct DatasetEntry {
  std::string image_id;
  std::filesystem::path path;
  Label label = Label::healthy;
  Variant variant = Variant::raw;

  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

struct DatasetManifest {
  DatasetName name = DatasetName::dataset_1;
  std::vector<DatasetEntry> entries;

  std::map<std::pair<Label, Variant>, std::size_t> counts() const;
  std::size_t size() const { return entries.size(); }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Every train-split record as a raw entry, in manifest order.
/// Throws DataError if the train split is empty.
DatasetManifest build_dataset_1(const SplitManifest& split);

/// dataset_1 plus one background_removed entry per accepted verdict, pointing at
/// `<seg_dir>/<image_id>_fg.png` and appended in image_id order. Throws DataError
/// when a train image has no verdict or an accepted one lacks its segmented file.
DatasetManifest build_dataset_2(const SplitManifest& split,
                                const std::map<std::string, GateVerdict>& verdicts,
                                const std::filesystem::path& seg_dir);

/// Evaluation manifest over one raw partition (val or test).
DatasetManifest raw_partition(const SplitManifest& split, Split which);

/// CSV with header image_id,path,label,variant. The dataset name is taken from
/// the file stem when reading ("dataset_1.csv" -> dataset_1; others -> dataset_1).
void write_dataset_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_dataset_manifest(const std::filesystem::path& path);

}  // namespace leafbg
