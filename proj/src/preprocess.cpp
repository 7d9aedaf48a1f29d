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

#include "leafbg/preprocess.hpp"

#include <string>

#include <opencv2/imgproc.hpp>

#include "leafbg/error.hpp"

namespace leafbg {

std::string_view to_string(Interpolation interpolation) noexcept {
  switch (interpolation) {
    case Interpolation::bilinear:
      return "bilinear";
    case Interpolation::nearest:
      return "nearest";
    case Interpolation::area:
      return "area";
    case Interpolation::bicubic:
      return "bicubic";
  }
  return "unknown";
}

Interpolation parse_interpolation(std::string_view text) {
  for (auto i : {Interpolation::bilinear, Interpolation::nearest, Interpolation::area,
                 Interpolation::bicubic}) {
    if (text == to_string(i)) {
      return i;
    }
  }
  throw UsageError("unknown interpolation '" + std::string(text) + "'");
}

namespace {

int cv_flag(Interpolation interpolation) {
  switch (interpolation) {
    case Interpolation::nearest:
      return cv::INTER_NEAREST;
    case Interpolation::area:
      return cv::INTER_AREA;
    case Interpolation::bicubic:
      return cv::INTER_CUBIC;
    case Interpolation::bilinear:
      break;
  }
  return cv::INTER_LINEAR;
}

}  // namespace

ImageTensor preprocess(const cv::Mat& image, const PreprocessSpec& spec) {
  if (image.empty() || image.depth() != CV_8U || image.channels() != 3) {
    throw DataError("preprocess expects an 8-bit RGB image, got " + std::to_string(image.channels()) +
                    " channel(s)");
  }
  if (spec.target_size < 1) {
    throw UsageError("preprocess target size must be positive");
  }
  const cv::Size size(spec.target_size, spec.target_size);
  cv::Mat resized;
  if (image.size() == size) {
    resized = image;
  } else {
    cv::resize(image, resized, size, 0, 0, cv_flag(spec.interpolation));
  }

  ImageTensor tensor;
  tensor.height = spec.target_size;
  tensor.width = spec.target_size;
  tensor.data.resize(static_cast<std::size_t>(tensor.height) * tensor.width * 3);
  std::size_t k = 0;
  for (int y = 0; y < resized.rows; ++y) {
    const auto* row = resized.ptr<cv::Vec3b>(y);
    for (int x = 0; x < resized.cols; ++x) {
      // BGR -> RGB
      tensor.data[k++] = row[x][2] / 255.0;
      tensor.data[k++] = row[x][1] / 255.0;
      tensor.data[k++] = row[x][0] / 255.0;
    }
  }
  return tensor;
}

}  // namespace leafbg
