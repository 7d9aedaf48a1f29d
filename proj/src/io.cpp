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

#include "leafbg/io.hpp"

#include <fstream>
#include <iterator>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "leafbg/error.hpp"

namespace leafbg {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw DataError("cannot write " + path.string());
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
      throw DataError("write failed for " + path.string());
    }
  }
  fs::rename(tmp, path);
}

cv::Mat read_color_image(const fs::path& path) {
  if (!fs::exists(path)) {
    throw DataError("image not found: " + path.string());
  }
  cv::Mat image = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (image.empty()) {
    throw DataError("cannot decode image: " + path.string());
  }
  if (image.depth() != CV_8U || image.channels() != 3) {
    throw DataError("not an 8-bit RGB image: " + path.string());
  }
  return image;
}

void write_image(const fs::path& path, const cv::Mat& image) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::vector<uchar> bytes;
  if (!cv::imencode(path.extension().string(), image, bytes)) {
    throw DataError("cannot encode image: " + path.string());
  }
  write_text_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace leafbg
