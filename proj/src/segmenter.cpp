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

#include "leafbg/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "leafbg/error.hpp"
#include "leafbg/io.hpp"

namespace leafbg {

namespace fs = std::filesystem;

ForegroundMask::ForegroundMask(cv::Mat values, std::string source_image_id)
    : values_(std::move(values)), source_image_id_(std::move(source_image_id)) {
  if (values_.empty() || values_.type() != CV_8UC1) {
    throw UsageError("foreground mask must be a non-empty CV_8UC1 matrix");
  }
  double max_value = 0.0;
  cv::minMaxLoc(values_, nullptr, &max_value);
  if (max_value > 1.0) {
    throw UsageError("foreground mask values must be 0 or 1");
  }
  foreground_pixels_ = static_cast<std::size_t>(cv::countNonZero(values_));
}

ForegroundMask ForegroundMask::from_nonzero(const cv::Mat& map, std::string source_image_id) {
  if (map.empty() || map.type() != CV_8UC1) {
    throw UsageError("mask source must be a non-empty CV_8UC1 matrix");
  }
  cv::Mat binary;
  cv::threshold(map, binary, 0, 1, cv::THRESH_BINARY);
  return {binary, std::move(source_image_id)};
}

double ForegroundMask::foreground_fraction() const {
  if (values_.empty()) {
    return 0.0;
  }
  return static_cast<double>(foreground_pixels_) / static_cast<double>(values_.total());
}

std::string_view to_string(GateReason reason) noexcept {
  switch (reason) {
    case GateReason::empty_foreground:
      return "empty_foreground";
    case GateReason::full_foreground:
      return "full_foreground";
    case GateReason::fraction_out_of_bounds:
      return "fraction_out_of_bounds";
    case GateReason::manual_reject:
      return "manual_reject";
  }
  return "unknown";
}

GateReason parse_gate_reason(std::string_view text) {
  for (GateReason r : {GateReason::empty_foreground, GateReason::full_foreground,
                       GateReason::fraction_out_of_bounds, GateReason::manual_reject}) {
    if (text == to_string(r)) {
      return r;
    }
  }
  throw DataError("unknown gate reason '" + std::string(text) + "'");
}

std::string_view to_string(BackendKind kind) noexcept {
  return kind == BackendKind::salient_model ? "salient" : "baseline";
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "salient" || text == "salient_model") {
    return BackendKind::salient_model;
  }
  if (text == "baseline" || text == "color_index_baseline") {
    return BackendKind::color_index_baseline;
  }
  throw UsageError("unknown segmentation backend '" + std::string(text) +
                   "' (expected salient or baseline)");
}

void SegmenterBackendId::validate() const {
  if (kind == BackendKind::salient_model && (!model_path || model_path->empty())) {
    throw UsageError("salient segmentation backend requires a model path");
  }
}

namespace {

void check_input(const cv::Mat& image) {
  if (image.empty() || image.type() != CV_8UC3) {
    throw DataError("segmentation input must be an 8-bit 3-channel image");
  }
  if (image.cols < 8 || image.rows < 8) {
    throw DataError("segmentation input is smaller than 8x8 (" + std::to_string(image.cols) + "x" +
                    std::to_string(image.rows) + ")");
  }
}

cv::Mat largest_component(const cv::Mat& binary) {
  cv::Mat labels;
  cv::Mat stats;
  cv::Mat centroids;
  const int n = cv::connectedComponentsWithStats(binary, labels, stats, centroids, 8, CV_32S);
  int best = 0;
  int best_area = 0;
  for (int i = 1; i < n; ++i) {
    const int area = stats.at<int>(i, cv::CC_STAT_AREA);
    if (area > best_area) {
      best_area = area;
      best = i;
    }
  }
  cv::Mat out = cv::Mat::zeros(binary.size(), CV_8UC1);
  if (best > 0) {
    out.setTo(1, labels == best);
  }
  return out;
}

}  // namespace

ForegroundMask segment_excess_green(const cv::Mat& image, const std::string& image_id,
                                    const BaselineParams& params) {
  check_input(image);
  // 2G - R - B lies in [-510, 510]; map linearly onto [0, 255].
  cv::Mat index(image.size(), CV_8UC1);
  for (int y = 0; y < image.rows; ++y) {
    const auto* src = image.ptr<cv::Vec3b>(y);
    auto* dst = index.ptr<uchar>(y);
    for (int x = 0; x < image.cols; ++x) {
      const int exg = 2 * src[x][1] - src[x][2] - src[x][0];
      dst[x] = static_cast<uchar>((exg + 510) / 4);
    }
  }

  cv::Mat binary;
  cv::threshold(index, binary, 0, 1, cv::THRESH_BINARY | cv::THRESH_OTSU);
  cv::Mat kept = largest_component(binary);

  int kernel = static_cast<int>(std::lround(params.closing_fraction * std::min(image.cols, image.rows)));
  kernel = std::max(3, kernel | 1);
  const cv::Mat element = cv::getStructuringElement(cv::MORPH_ELLIPSE, cv::Size(kernel, kernel));
  cv::Mat closed;
  cv::morphologyEx(kept, closed, cv::MORPH_CLOSE, element);
  return {closed, image_id};
}

Segmenter::Segmenter(SegmenterBackendId backend, double threshold, SaliencyInputSpec saliency,
                     BaselineParams baseline)
    : backend_(std::move(backend)), threshold_(threshold), saliency_(saliency), baseline_(baseline) {
  backend_.validate();
  if (!(threshold_ > 0.0 && threshold_ < 1.0)) {
    throw UsageError("segmentation threshold must lie in (0, 1)");
  }
  if (backend_.kind != BackendKind::salient_model) {
    return;
  }
  const fs::path& path = *backend_.model_path;
  if (!fs::is_regular_file(path)) {
    throw RuntimeFailure("saliency model not found: " + path.string());
  }
  try {
    net_ = cv::dnn::readNetFromONNX(path.string());
  } catch (const cv::Exception& e) {
    throw RuntimeFailure("cannot load saliency model " + path.string() + ": " + e.what());
  }
  if (net_.empty()) {
    throw RuntimeFailure("saliency model is empty: " + path.string());
  }
  net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
  net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
}

cv::Mat Segmenter::saliency_map(const cv::Mat& image) {
  check_input(image);
  if (backend_.kind != BackendKind::salient_model) {
    throw UsageError("saliency_map requires the salient backend");
  }
  const int side = saliency_.input_size;
  cv::Mat resized;
  cv::resize(image, resized, cv::Size(side, side), 0, 0, cv::INTER_LINEAR);
  cv::Mat rgb;
  cv::cvtColor(resized, rgb, cv::COLOR_BGR2RGB);
  cv::Mat input;
  rgb.convertTo(input, CV_32FC3);
  double max_value = 0.0;
  cv::minMaxLoc(input.reshape(1), nullptr, &max_value);
  if (max_value > 0.0) {
    input /= max_value;
  }
  cv::subtract(input, saliency_.mean, input);
  cv::divide(input, saliency_.std, input);

  cv::Mat prediction;
  try {
    net_.setInput(cv::dnn::blobFromImage(input));
    prediction = net_.forward();
  } catch (const cv::Exception& e) {
    throw RuntimeFailure(std::string("saliency inference failed: ") + e.what());
  }
  if (prediction.dims != 4 || prediction.size[0] != 1 || prediction.size[1] != 1) {
    throw RuntimeFailure("saliency model must output a 1x1xHxW map");
  }
  cv::Mat map(prediction.size[2], prediction.size[3], CV_32F, prediction.ptr<float>());
  double lo = 0.0;
  double hi = 0.0;
  cv::minMaxLoc(map, &lo, &hi);
  cv::Mat normalised;
  if (hi > lo) {
    map.convertTo(normalised, CV_32F, 1.0 / (hi - lo), -lo / (hi - lo));
  } else {
    normalised = cv::Mat::zeros(map.size(), CV_32F);
  }
  cv::Mat full;
  cv::resize(normalised, full, image.size(), 0, 0, cv::INTER_LINEAR);
  return full;
}

ForegroundMask Segmenter::segment(const cv::Mat& image, const std::string& image_id) {
  check_input(image);
  if (backend_.kind == BackendKind::color_index_baseline) {
    return segment_excess_green(image, image_id, baseline_);
  }
  const cv::Mat map = saliency_map(image);
  cv::Mat binary = cv::Mat::zeros(map.size(), CV_8UC1);
  binary.setTo(1, map > threshold_);
  return {binary, image_id};
}

cv::Mat apply_mask(const cv::Mat& image, const ForegroundMask& mask, const cv::Vec3b& fill) {
  if (image.empty() || image.type() != CV_8UC3) {
    throw UsageError("apply_mask expects an 8-bit 3-channel image");
  }
  if (image.cols != mask.width() || image.rows != mask.height()) {
    throw UsageError("mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                     " but image is " + std::to_string(image.cols) + "x" + std::to_string(image.rows));
  }
  cv::Mat out(image.size(), CV_8UC3, cv::Scalar(fill[0], fill[1], fill[2]));
  image.copyTo(out, mask.values());
  return out;
}

GateVerdict gate(const ForegroundMask& mask, const GateBounds& bounds,
                 const std::set<std::string>& manual_rejects) {
  if (!(bounds.min_fraction < bounds.max_fraction)) {
    throw UsageError("gate bounds require min_fraction < max_fraction");
  }
  GateVerdict verdict;
  const std::size_t total = static_cast<std::size_t>(mask.width()) * mask.height();
  const double fraction = mask.foreground_fraction();
  if (mask.foreground_pixels() == 0) {
    verdict.reasons.push_back(GateReason::empty_foreground);
  }
  if (total > 0 && mask.foreground_pixels() == total) {
    verdict.reasons.push_back(GateReason::full_foreground);
  }
  if (fraction < bounds.min_fraction || fraction > bounds.max_fraction) {
    verdict.reasons.push_back(GateReason::fraction_out_of_bounds);
  }
  if (manual_rejects.contains(mask.source_image_id())) {
    verdict.reasons.push_back(GateReason::manual_reject);
  }
  return verdict;
}

std::set<std::string> read_reject_list(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    const auto last = line.find_last_not_of(" \t\r");
    ids.insert(line.substr(first, last - first + 1));
  }
  return ids;
}

void write_mask_png(const ForegroundMask& mask, const fs::path& path) {
  cv::Mat out;
  mask.values().convertTo(out, CV_8U, 255.0);
  write_image(path, out);
}

ForegroundMask read_mask_png(const fs::path& path, const std::string& image_id) {
  cv::Mat map = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (map.empty()) {
    throw DataError("cannot read mask " + path.string());
  }
  return ForegroundMask::from_nonzero(map, image_id);
}

std::string mask_file_name(const std::string& image_id) { return image_id + "_mask.png"; }
std::string segmented_file_name(const std::string& image_id) { return image_id + "_fg.png"; }

}  // namespace leafbg
