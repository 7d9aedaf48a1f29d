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

#include "leafbg/augmenter.hpp"

#include <algorithm>

#include "leafbg/csv.hpp"
#include "leafbg/error.hpp"

namespace leafbg {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kHeader{"image_id", "path", "label", "variant"};

}  // namespace

std::string_view to_string(DatasetName name) noexcept {
  return name == DatasetName::dataset_1 ? "dataset_1" : "dataset_2";
}

DatasetName parse_dataset_name(std::string_view text) {
  if (text == "dataset_1" || text == "1") {
    return DatasetName::dataset_1;
  }
  if (text == "dataset_2" || text == "2") {
    return DatasetName::dataset_2;
  }
  throw UsageError("unknown dataset '" + std::string(text) + "' (expected 1 or 2)");
}

std::string_view to_string(Variant variant) noexcept {
  return variant == Variant::raw ? "raw" : "background_removed";
}

Variant parse_variant(std::string_view text) {
  if (text == "raw") {
    return Variant::raw;
  }
  if (text == "background_removed") {
    return Variant::background_removed;
  }
  throw DataError("unknown variant '" + std::string(text) + "'");
}

std::map<std::pair<Label, Variant>, std::size_t> DatasetManifest::counts() const {
  std::map<std::pair<Label, Variant>, std::size_t> table;
  for (const auto& e : entries) {
    ++table[{e.label, e.variant}];
  }
  return table;
}

DatasetManifest build_dataset_1(const SplitManifest& split) {
  DatasetManifest manifest{DatasetName::dataset_1, {}};
  for (const auto& r : split.records) {
    if (r.split == Split::train) {
      manifest.entries.push_back({r.image_id, r.path, r.label, Variant::raw});
    }
  }
  if (manifest.entries.empty()) {
    throw DataError("split manifest has an empty train partition");
  }
  return manifest;
}

DatasetManifest build_dataset_2(const SplitManifest& split,
                                const std::map<std::string, GateVerdict>& verdicts,
                                const fs::path& seg_dir) {
  DatasetManifest manifest = build_dataset_1(split);
  manifest.name = DatasetName::dataset_2;

  std::vector<DatasetEntry> augmented;
  std::vector<std::string> missing_verdicts;
  std::vector<std::string> missing_files;
  for (const auto& raw : manifest.entries) {
    const auto it = verdicts.find(raw.image_id);
    if (it == verdicts.end()) {
      missing_verdicts.push_back(raw.image_id);
      continue;
    }
    if (!it->second.accepted()) {
      continue;
    }
    fs::path segmented = seg_dir / segmented_file_name(raw.image_id);
    if (!fs::exists(segmented)) {
      missing_files.push_back(segmented.string());
      continue;
    }
    augmented.push_back({raw.image_id, std::move(segmented), raw.label, Variant::background_removed});
  }
  auto join = [](const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
      out += (out.empty() ? "" : ", ") + s;
    }
    return out;
  };
  if (!missing_verdicts.empty()) {
    throw DataError("train images without a gate verdict: " + join(missing_verdicts));
  }
  if (!missing_files.empty()) {
    throw DataError("accepted verdicts without a segmented image: " + join(missing_files));
  }
  std::sort(augmented.begin(), augmented.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.image_id < b.image_id; });
  manifest.entries.insert(manifest.entries.end(), augmented.begin(), augmented.end());
  return manifest;
}

DatasetManifest raw_partition(const SplitManifest& split, Split which) {
  DatasetManifest manifest{DatasetName::dataset_1, {}};
  for (const auto& r : split.records) {
    if (r.split == which) {
      manifest.entries.push_back({r.image_id, r.path, r.label, Variant::raw});
    }
  }
  return manifest;
}

void write_dataset_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    rows.push_back({e.image_id, e.path.string(), std::string(to_string(e.label)),
                    std::string(to_string(e.variant))});
  }
  csv::write(path, kHeader, rows);
}

DatasetManifest read_dataset_manifest(const fs::path& path) {
  const csv::Table table = csv::read(path);
  csv::require_header(table, kHeader, path.string());
  DatasetManifest manifest;
  manifest.name =
      path.stem() == "dataset_2" ? DatasetName::dataset_2 : DatasetName::dataset_1;
  for (const auto& row : table.rows) {
    manifest.entries.push_back({row[0], fs::path(row[1]), parse_label(row[2]), parse_variant(row[3])});
  }
  return manifest;
}

}  // namespace leafbg
