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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

namespace leafbg {

/// Binary foreground map for one source image.
class ForegroundMask {
 public:
  ForegroundMask() = default;
  /// `values` must be CV_8UC1 containing only 0 and 1.
  ForegroundMask(cv::Mat values, std::string source_image_id);

  /// Builds from an 8-bit map where any non-zero pixel is foreground.
  static ForegroundMask from_nonzero(const cv::Mat& map, std::string source_image_id);

  int width() const { return values_.cols; }
  int height() const { return values_.rows; }
  const cv::Mat& values() const { return values_; }
  const std::string& source_image_id() const { return source_image_id_; }
  std::size_t foreground_pixels() const { return foreground_pixels_; }
  /// Exactly foreground_pixels / (width * height).
  double foreground_fraction() const;

 private:
  cv::Mat values_;
  std::string source_image_id_;
  std::size_t foreground_pixels_ = 0;
};

enum class GateReason { empty_foreground, full_foreground, fraction_out_of_bounds, manual_reject };

std::string_view to_string(GateReason reason) noexcept;
GateReason parse_gate_reason(std::string_view text);

struct GateVerdict {
  std::vector<GateReason> reasons;

  bool accepted() const { return reasons.empty(); }
  friend bool operator==(const GateVerdict&, const GateVerdict&) = default;
};

struct GateBounds {
  double min_fraction = 0.05;
  double max_fraction = 0.95;
};

enum class BackendKind { salient_model, color_index_baseline };

std::string_view to_string(BackendKind kind) noexcept;
/// Accepts "salient"/"salient_model" and "baseline"/"color_index_baseline".
BackendKind parse_backend_kind(std::string_view text);

struct SegmenterBackendId {
  BackendKind kind = BackendKind::color_index_baseline;
  std::optional<std::filesystem::path> model_path;

  /// Throws UsageError when salient_model lacks a model path.
  void validate() const;
};

/// Input convention of the salient-object network (U2-Net style by default).
struct SaliencyInputSpec {
  int input_size = 320;
  cv::Scalar mean{0.485, 0.456, 0.406};
  cv::Scalar std{0.229, 0.224, 0.225};
};

/// Parameters of the excess-green baseline.
struct BaselineParams {
  /// Closing kernel diameter as a fraction of min(width, height); forced odd, at least 3.
  double closing_fraction = 0.10;
};

/// Excess-green (2G - R - B) index, Otsu threshold, largest connected component,
/// one morphological closing. `image` is BGR. Deterministic.
ForegroundMask segment_excess_green(const cv::Mat& image, const std::string& image_id,
                                    const BaselineParams& params = {});

/// Runs a pluggable segmentation backend over BGR images.
///
/// The saliency network is loaded once in the constructor. cv::dnn::Net is not
/// safe for concurrent forward passes, so use one Segmenter per worker thread.
class Segmenter {
 public:
  /// Throws RuntimeFailure if the saliency model is missing or cannot be parsed;
  /// UsageError if threshold is outside (0, 1).
  explicit Segmenter(SegmenterBackendId backend, double threshold = 0.5,
                     SaliencyInputSpec saliency = {}, BaselineParams baseline = {});

  /// Throws DataError for images smaller than 8x8 or not 3-channel 8-bit.
  ForegroundMask segment(const cv::Mat& image, const std::string& image_id);

  /// Saliency map in [0,1] at source resolution (salient backend only).
  cv::Mat saliency_map(const cv::Mat& image);

  const SegmenterBackendId& backend() const { return backend_; }
  double threshold() const { return threshold_; }

 private:
  SegmenterBackendId backend_;
  double threshold_;
  SaliencyInputSpec saliency_;
  BaselineParams baseline_;
  cv::dnn::Net net_;
};

/// Source pixel where mask = 1, `fill` (BGR) where mask = 0.
cv::Mat apply_mask(const cv::Mat& image, const ForegroundMask& mask,
                   const cv::Vec3b& fill = cv::Vec3b(0, 0, 0));

/// Quality gate: rejects empty and full masks, fractions outside the bounds, and
/// manually listed ids. Reasons are listed in enum order.
GateVerdict gate(const ForegroundMask& mask, const GateBounds& bounds,
                 const std::set<std::string>& manual_rejects);

/// One image_id per line; blank lines and '#' comments are ignored.
std::set<std::string> read_reject_list(const std::filesystem::path& path);

/// 8-bit single-channel PNG, 255 = foreground.
void write_mask_png(const ForegroundMask& mask, const std::filesystem::path& path);
ForegroundMask read_mask_png(const std::filesystem::path& path, const std::string& image_id);

std::string mask_file_name(const std::string& image_id);
std::string segmented_file_name(const std::string& image_id);

}  // namespace leafbg
