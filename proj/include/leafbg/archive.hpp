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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace leafbg {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> values;

  std::int64_t element_count() const;
};

/// Named tensors plus free-form JSON metadata.
///
/// On-disk layout (all integers little-endian):
///   8 bytes   magic "LBGTENS1"
///   8 bytes   header length H
///   H bytes   JSON header {"meta": {...}, "tensors": [{"name", "shape", "dtype", "offset"}]}
///   ...       packed tensor payloads, dtype "f32" or "f64", offsets relative to payload start
struct TensorArchive {
  std::map<std::string, Tensor> tensors;
  nlohmann::json meta = nlohmann::json::object();

  const Tensor& at(const std::string& name) const;
};

enum class StoragePrecision { f32, f64 };

void write_archive(const std::filesystem::path& path, const TensorArchive& archive,
                   StoragePrecision precision = StoragePrecision::f64);
TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace leafbg
