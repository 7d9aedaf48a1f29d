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

#include <opencv2/core.hpp>

#include "leafbg/corpus.hpp"
#include "leafbg/labels.hpp"

namespace leafbg::synthetic {

/// Orange band used for rust spots, in OpenCV HSV units (H in [0,180)).
inline constexpr int kRustHueMin = 8;
inline constexpr int kRustHueMax = 22;
inline constexpr int kRustMinSaturation = 150;
inline constexpr int kRustMinValue = 150;

inline const cv::Size kDefaultImageSize{384, 256};

/// True when a BGR pixel falls in the rust spot colour band.
bool in_rust_band(const cv::Vec3b& bgr);

struct Sample {
  cv::Mat image;      ///< CV_8UC3, BGR.
  cv::Mat leaf_mask;  ///< CV_8UC1, 1 inside the leaf ellipse, 0 elsewhere.
};

/// Renders one leaf-like ellipse on a cluttered background.
///
/// healthy: plain green leaf. rust: round orange spots. scab: clusters of
/// dark olive-brown blotches. The background clutter is near-neutral (no green,
/// orange or olive), so the class signal lives on the leaf.
Sample render(Label label, std::uint64_t seed, cv::Size size = kDefaultImageSize);

/// Writes `n_per_class` images per class as `<out_dir>/images/<id>.png`, their
/// ground-truth leaf masks as `<out_dir>/gt_masks/<id>_mask.png` (255 = leaf), and
/// a one-hot label table `<out_dir>/train.csv`. Output is byte-identical for a
/// given (n_per_class, seed).
CorpusSummary generate_corpus(std::size_t n_per_class, std::uint64_t seed,
                              const std::filesystem::path& out_dir,
                              cv::Size size = kDefaultImageSize);

std::filesystem::path label_table_path(const std::filesystem::path& corpus_dir);
std::filesystem::path image_dir(const std::filesystem::path& corpus_dir);
std::filesystem::path gt_mask_path(const std::filesystem::path& corpus_dir,
                                   const std::string& image_id);

}  // namespace leafbg::synthetic
