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

#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

namespace leafbg {

enum class Interpolation { bilinear, nearest, area, bicubic };

std::string_view to_string(Interpolation interpolation) noexcept;
Interpolation parse_interpolation(std::string_view text);

/// Resize to a square input and scale intensities to [0, 1] by dividing by 255.
/// No mean/std standardisation is applied.
struct PreprocessSpec {
  int target_size = 224;
  Interpolation interpolation = Interpolation::bilinear;
};

/// Row-major HWC tensor in RGB channel order.
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static constexpr int channels = 3;
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// `image` must be 8-bit, 3-channel, BGR (OpenCV order). Throws DataError otherwise.
ImageTensor preprocess(const cv::Mat& image, const PreprocessSpec& spec = {});

}  // namespace leafbg
