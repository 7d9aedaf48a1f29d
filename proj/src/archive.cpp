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

#include "leafbg/archive.hpp"

#include <bit>
#include <cstring>
#include <numeric>

#include "leafbg/error.hpp"
#include "leafbg/io.hpp"

namespace leafbg {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'L', 'B', 'G', 'T', 'E', 'N', 'S', '1'};

template <typename T>
void append_raw(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

std::int64_t Tensor::element_count() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

const Tensor& TensorArchive::at(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw DataError("tensor '" + name + "' missing from archive");
  }
  return it->second;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive,
                   StoragePrecision precision) {
  const bool f64 = precision == StoragePrecision::f64;
  const std::size_t width = f64 ? 8 : 4;
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, tensor] : archive.tensors) {
    if (tensor.element_count() != static_cast<std::int64_t>(tensor.values.size())) {
      throw UsageError("tensor '" + name + "' shape does not match its value count");
    }
    header["tensors"].push_back(
        {{"name", name}, {"shape", tensor.shape}, {"dtype", f64 ? "f64" : "f32"}, {"offset", offset}});
    offset += tensor.values.size() * width;
  }
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  append_raw(out, static_cast<std::uint64_t>(header_text.size()));
  out += header_text;
  out.reserve(out.size() + offset);
  for (const auto& [name, tensor] : archive.tensors) {
    for (double v : tensor.values) {
      if (f64) {
        append_raw(out, v);
      } else {
        append_raw(out, static_cast<float>(v));
      }
    }
  }
  write_text_file(path, out);
}

TensorArchive read_archive(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a tensor archive: " + path.string());
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, sizeof(header_len));
  if (16 + header_len > bytes.size()) {
    throw DataError("truncated tensor archive header: " + path.string());
  }
  TensorArchive archive;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
    archive.meta = header.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed tensor archive header in " + path.string() + ": " + e.what());
  }
  const std::size_t payload = 16 + header_len;
  for (const auto& entry : header.at("tensors")) {
    Tensor tensor;
    tensor.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const std::string dtype = entry.at("dtype").get<std::string>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const auto count = static_cast<std::size_t>(tensor.element_count());
    const std::size_t width = dtype == "f64" ? 8 : dtype == "f32" ? 4 : 0;
    if (width == 0) {
      throw DataError("unsupported dtype '" + dtype + "' in " + path.string());
    }
    if (payload + offset + count * width > bytes.size()) {
      throw DataError("truncated tensor payload in " + path.string());
    }
    tensor.values.resize(count);
    const char* src = bytes.data() + payload + offset;
    for (std::size_t i = 0; i < count; ++i) {
      if (width == 8) {
        std::memcpy(&tensor.values[i], src + 8 * i, 8);
      } else {
        float f = 0.0F;
        std::memcpy(&f, src + 4 * i, 4);
        tensor.values[i] = f;
      }
    }
    archive.tensors.emplace(entry.at("name").get<std::string>(), std::move(tensor));
  }
  return archive;
}

}  // namespace leafbg
