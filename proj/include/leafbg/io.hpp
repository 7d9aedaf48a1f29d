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
#include <string>
#include <string_view>

#include <opencv2/core.hpp>

namespace leafbg {

std::string read_text_file(const std::filesystem::path& path);

/// Writes atomically enough for our purposes: to a sibling temp file, then rename.
/// Parent directories are created.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Decodes a 3-channel 8-bit image (OpenCV BGR order). Throws DataError naming the path.
cv::Mat read_color_image(const std::filesystem::path& path);

/// Encodes by extension (PNG recommended). Parent directories are created.
void write_image(const std::filesystem::path& path, const cv::Mat& image);

}  // namespace leafbg
