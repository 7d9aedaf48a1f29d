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

#include "leafbg/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "leafbg/csv.hpp"
#include "leafbg/error.hpp"
#include "leafbg/io.hpp"
#include "leafbg/random.hpp"

namespace leafbg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kLabelTableHeader{"image_id", "healthy", "multiple_diseases", "rust",
                                                 "scab"};
const std::vector<std::string> kManifestHeader{"image_id", "path", "label", "split"};

int parse_one_hot_cell(const std::string& cell, const std::string& image_id) {
  int value = -1;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || (value != 0 && value != 1)) {
    throw DataError("label table row '" + image_id + "': one-hot cell '" + cell +
                    "' is not 0 or 1");
  }
  return value;
}

fs::path resolve_image(const fs::path& image_dir, const std::string& image_id) {
  for (const char* ext : {".jpg", ".jpeg", ".png", ".JPG", ".PNG"}) {
    fs::path candidate = image_dir / (image_id + ext);
    if (fs::exists(candidate)) {
      return candidate;
    }
  }
  return {};
}

std::map<Label, std::vector<std::size_t>> indices_by_class(
    std::span<const LabeledImageRecord> records) {
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_class[records[i].label].push_back(i);
  }
  return by_class;
}

std::size_t floor_times(const Ratio& ratio, std::size_t n) {
  return static_cast<std::size_t>(static_cast<std::int64_t>(n) * ratio.num / ratio.den);
}

}  // namespace

CorpusSummary summarize(std::span<const LabeledImageRecord> records, std::uint64_t seed) {
  CorpusSummary summary;
  summary.seed = seed;
  for (Label label : kAllLabels) {
    summary.per_class_counts[label] = 0;
  }
  for (const auto& record : records) {
    ++summary.per_class_counts[record.label];
  }
  summary.total = records.size();
  return summary;
}

SplitRatios SplitRatios::from_weights(std::int64_t train, std::int64_t val, std::int64_t test) {
  const std::int64_t sum = train + val + test;
  if (train < 0 || val < 0 || test < 0 || sum <= 0) {
    throw UsageError("split weights must be non-negative with a positive sum");
  }
  return {{train, sum}, {val, sum}, {test, sum}};
}

void SplitRatios::validate() const {
  for (const Ratio& r : {train, val, test}) {
    if (r.den <= 0 || r.num < 0 || r.num > r.den) {
      throw UsageError("split ratio " + std::to_string(r.num) + "/" + std::to_string(r.den) +
                       " is not in [0, 1]");
    }
  }
  // a/b + c/d + e/f == 1  <=>  a*d*f + c*b*f + e*b*d == b*d*f
  const std::int64_t lhs =
      train.num * val.den * test.den + val.num * train.den * test.den + test.num * train.den * val.den;
  const std::int64_t rhs = train.den * val.den * test.den;
  if (lhs != rhs) {
    throw UsageError("split ratios do not sum to 1");
  }
}

ClassSplitCounts split_counts(std::size_t n, const SplitRatios& ratios) {
  ratios.validate();
  ClassSplitCounts counts;
  counts.val = floor_times(ratios.val, n);
  counts.test = floor_times(ratios.test, n);
  counts.train = n - counts.val - counts.test;
  return counts;
}

std::vector<LabeledImageRecord> SplitManifest::partition(Split which) const {
  std::vector<LabeledImageRecord> out;
  for (const auto& record : records) {
    if (record.split == which) {
      out.push_back(record);
    }
  }
  return out;
}

IngestResult ingest(const fs::path& label_table, const fs::path& image_dir) {
  const csv::Table table = csv::read(label_table);
  csv::require_header(table, kLabelTableHeader, label_table.string());

  IngestResult result;
  std::set<std::string> seen;
  std::vector<std::string> missing;
  for (const auto& row : table.rows) {
    const std::string& image_id = row[0];
    if (!seen.insert(image_id).second) {
      throw DataError("duplicate image_id in label table: " + image_id);
    }
    const int healthy = parse_one_hot_cell(row[1], image_id);
    const int multiple = parse_one_hot_cell(row[2], image_id);
    const int rust = parse_one_hot_cell(row[3], image_id);
    const int scab = parse_one_hot_cell(row[4], image_id);
    const int hot = healthy + multiple + rust + scab;
    if (hot != 1) {
      throw DataError("label table row '" + image_id + "' has " + std::to_string(hot) +
                      " labels set; exactly one is required");
    }
    if (multiple == 1) {
      ++result.summary.dropped;
      continue;
    }
    LabeledImageRecord record;
    record.image_id = image_id;
    record.label = healthy ? Label::healthy : (rust ? Label::rust : Label::scab);
    record.path = resolve_image(image_dir, image_id);
    if (record.path.empty()) {
      missing.push_back(image_id);
      continue;
    }
    result.records.push_back(std::move(record));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) {
      list += (list.empty() ? "" : ", ") + id;
    }
    throw DataError(std::to_string(missing.size()) + " image file(s) missing under " +
                    image_dir.string() + ": " + list);
  }
  const std::size_t dropped = result.summary.dropped;
  result.summary = summarize(result.records);
  result.summary.dropped = dropped;
  return result;
}

std::vector<LabeledImageRecord> balance(std::span<const LabeledImageRecord> records,
                                        std::uint64_t seed) {
  auto by_class = indices_by_class(records);
  std::size_t target = records.size();
  for (Label label : kAllLabels) {
    const auto it = by_class.find(label);
    if (it == by_class.end() || it->second.empty()) {
      throw DataError("cannot balance: class '" + std::string(to_string(label)) +
                      "' has no records");
    }
    target = std::min(target, it->second.size());
  }

  const std::uint64_t balance_seed = derive_seed(seed, "balance");
  std::vector<bool> keep(records.size(), false);
  for (Label label : kAllLabels) {
    const auto& members = by_class[label];
    Rng rng(derive_seed(balance_seed, index_of(label)));
    const auto order = rng.permutation(members.size());
    for (std::size_t k = 0; k < target; ++k) {
      keep[members[order[k]]] = true;
    }
  }

  std::vector<LabeledImageRecord> out;
  out.reserve(target * kNumClasses);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (keep[i]) {
      out.push_back(records[i]);
    }
  }
  return out;
}

SplitManifest split(std::span<const LabeledImageRecord> records, const SplitRatios& ratios,
                    std::uint64_t seed) {
  ratios.validate();
  SplitManifest manifest;
  manifest.records.assign(records.begin(), records.end());
  manifest.ratios = ratios;
  manifest.seed = seed;

  const std::uint64_t split_seed = derive_seed(seed, "split");
  auto by_class = indices_by_class(records);
  for (auto& [label, members] : by_class) {
    const ClassSplitCounts counts = split_counts(members.size(), ratios);
    manifest.per_class_split_counts[label] = counts;
    Rng rng(derive_seed(split_seed, index_of(label)));
    const auto order = rng.permutation(members.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      Split assigned = Split::test;
      if (k < counts.train) {
        assigned = Split::train;
      } else if (k < counts.train + counts.val) {
        assigned = Split::val;
      }
      manifest.records[members[order[k]]].split = assigned;
    }
  }
  return manifest;
}

void write_split_manifest(const SplitManifest& manifest, const fs::path& csv_path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    if (r.split == Split::unassigned) {
      throw UsageError("record '" + r.image_id + "' has no split assignment");
    }
    rows.push_back({r.image_id, r.path.string(), std::string(to_string(r.label)),
                    std::string(to_string(r.split))});
  }
  csv::write(csv_path, kManifestHeader, rows);

  json meta;
  meta["seed"] = manifest.seed;
  meta["ratios"] = json::array();
  for (const Ratio& r : {manifest.ratios.train, manifest.ratios.val, manifest.ratios.test}) {
    meta["ratios"].push_back({r.num, r.den});
  }
  json counts = json::object();
  for (const auto& [label, c] : manifest.per_class_split_counts) {
    counts[std::string(to_string(label))] = {c.train, c.val, c.test};
  }
  meta["per_class_split_counts"] = counts;
  fs::path meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  write_text_file(meta_path, meta.dump(2) + "\n");
}

SplitManifest read_split_manifest(const fs::path& csv_path) {
  const csv::Table table = csv::read(csv_path);
  csv::require_header(table, kManifestHeader, csv_path.string());
  fs::path meta_path = csv_path;
  meta_path.replace_extension(".meta.json");

  SplitManifest manifest;
  json meta;
  try {
    meta = json::parse(read_text_file(meta_path));
    manifest.seed = meta.at("seed").get<std::uint64_t>();
    const auto& ratios = meta.at("ratios");
    manifest.ratios = {{ratios.at(0).at(0), ratios.at(0).at(1)},
                       {ratios.at(1).at(0), ratios.at(1).at(1)},
                       {ratios.at(2).at(0), ratios.at(2).at(1)}};
  } catch (const json::exception& e) {
    throw DataError("malformed manifest metadata " + meta_path.string() + ": " + e.what());
  }

  for (const auto& row : table.rows) {
    LabeledImageRecord r{row[0], fs::path(row[1]), parse_label(row[2]), parse_split(row[3])};
    if (r.split == Split::unassigned) {
      throw DataError(csv_path.string() + ": record '" + r.image_id + "' is unassigned");
    }
    auto& c = manifest.per_class_split_counts[r.label];
    (r.split == Split::train ? c.train : r.split == Split::val ? c.val : c.test) += 1;
    manifest.records.push_back(std::move(r));
  }

  for (const auto& [label, c] : manifest.per_class_split_counts) {
    const auto& stored = meta["per_class_split_counts"][std::string(to_string(label))];
    if (stored != json{c.train, c.val, c.test}) {
      throw DataError(csv_path.string() + ": per-class split counts disagree with metadata for '" +
                      std::string(to_string(label)) + "'");
    }
  }
  return manifest;
}

void write_label_table(const fs::path& path, std::span<const LabeledImageRecord> records) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    rows.push_back({r.image_id, r.label == Label::healthy ? "1" : "0", "0",
                    r.label == Label::rust ? "1" : "0", r.label == Label::scab ? "1" : "0"});
  }
  csv::write(path, kLabelTableHeader, rows);
}

}  // namespace leafbg
