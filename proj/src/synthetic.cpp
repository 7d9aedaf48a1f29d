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

#include "leafbg/synthetic.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "leafbg/error.hpp"
#include "leafbg/io.hpp"
#include "leafbg/random.hpp"

namespace leafbg::synthetic {

namespace fs = std::filesystem;

namespace {

// Near-neutral RGB triples (converted to BGR when drawn). Clutter varies in
// brightness and shape but stays desaturated, so hue lives on the leaf.
constexpr std::array<std::array<int, 3>, 7> kBackgroundPalette{{
    {128, 128, 128},  // gray
    {70, 70, 75},     // dark gray
    {150, 155, 165},  // cool gray
    {180, 180, 190},  // light gray
    {200, 196, 190},  // warm white
    {95, 98, 108},    // slate
    {45, 48, 52},     // charcoal
}};

cv::Scalar bgr(int r, int g, int b) { return {double(b), double(g), double(r)}; }

int jitter(Rng& rng, int value, int amount) {
  return std::clamp(value + rng.uniform_int(-amount, amount), 0, 255);
}

cv::Scalar palette_colour(Rng& rng) {
  const auto& c = kBackgroundPalette[rng.below(kBackgroundPalette.size())];
  const int shift = rng.uniform_int(-25, 25);
  return bgr(jitter(rng, c[0] + shift, 5), jitter(rng, c[1] + shift, 5), jitter(rng, c[2] + shift, 5));
}

void draw_clutter(cv::Mat& image, Rng& rng) {
  const int w = image.cols;
  const int h = image.rows;
  const int shapes = rng.uniform_int(25, 40);
  for (int i = 0; i < shapes; ++i) {
    const cv::Point centre(rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1));
    const cv::Scalar colour = palette_colour(rng);
    switch (rng.below(3)) {
      case 0:
        cv::circle(image, centre, rng.uniform_int(4, h / 6), colour, cv::FILLED, cv::LINE_8);
        break;
      case 1: {
        const cv::Point other(centre.x + rng.uniform_int(-w / 5, w / 5),
                              centre.y + rng.uniform_int(-h / 5, h / 5));
        cv::rectangle(image, centre, other, colour, cv::FILLED, cv::LINE_8);
        break;
      }
      default: {
        const cv::Point other(rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1));
        cv::line(image, centre, other, colour, rng.uniform_int(1, 4), cv::LINE_8);
        break;
      }
    }
  }
}

/// Random point inside the rotated ellipse, at most `reach` of the way to the rim.
cv::Point point_in_ellipse(Rng& rng, cv::Point2d centre, cv::Size2d axes, double angle_deg,
                           double reach) {
  const double t = 2.0 * std::numbers::pi * rng.uniform();
  const double r = reach * std::sqrt(rng.uniform());
  const double ex = r * axes.width * std::cos(t);
  const double ey = r * axes.height * std::sin(t);
  const double a = angle_deg * std::numbers::pi / 180.0;
  return {static_cast<int>(std::lround(centre.x + ex * std::cos(a) - ey * std::sin(a))),
          static_cast<int>(std::lround(centre.y + ex * std::sin(a) + ey * std::cos(a)))};
}

void add_noise(cv::Mat& image, Rng& rng, double sigma) {
  for (int y = 0; y < image.rows; ++y) {
    auto* row = image.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = row[x][c] + sigma * rng.normal();
        row[x][c] = static_cast<uchar>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
}

}  // namespace

bool in_rust_band(const cv::Vec3b& pixel) {
  cv::Mat one(1, 1, CV_8UC3, cv::Scalar(pixel[0], pixel[1], pixel[2]));
  cv::Mat hsv;
  cv::cvtColor(one, hsv, cv::COLOR_BGR2HSV);
  const auto p = hsv.at<cv::Vec3b>(0, 0);
  return p[0] >= kRustHueMin && p[0] <= kRustHueMax && p[1] >= kRustMinSaturation &&
         p[2] >= kRustMinValue;
}

Sample render(Label label, std::uint64_t seed, cv::Size size) {
  if (size.width < 64 || size.height < 64) {
    throw UsageError("synthetic images must be at least 64x64");
  }
  Rng rng(seed);
  Sample sample;
  sample.image = cv::Mat(size, CV_8UC3, palette_colour(rng));
  draw_clutter(sample.image, rng);

  const double w = size.width;
  const double h = size.height;
  const cv::Point2d centre(w / 2 + rng.uniform(-0.08, 0.08) * w, h / 2 + rng.uniform(-0.06, 0.06) * h);
  const cv::Size2d axes(rng.uniform(0.26, 0.32) * w, rng.uniform(0.28, 0.34) * h);
  const double angle = rng.uniform(-25.0, 25.0);
  const cv::Point centre_px(static_cast<int>(std::lround(centre.x)),
                            static_cast<int>(std::lround(centre.y)));
  const cv::Size axes_px(static_cast<int>(std::lround(axes.width)),
                         static_cast<int>(std::lround(axes.height)));

  sample.leaf_mask = cv::Mat::zeros(size, CV_8UC1);
  cv::ellipse(sample.leaf_mask, centre_px, axes_px, angle, 0, 360, cv::Scalar(1), cv::FILLED,
              cv::LINE_8);

  const cv::Scalar leaf = bgr(jitter(rng, 70, 12), jitter(rng, 150, 15), jitter(rng, 50, 10));
  cv::ellipse(sample.image, centre_px, axes_px, angle, 0, 360, leaf, cv::FILLED, cv::LINE_8);
  // Midrib along the major axis.
  const double a = angle * std::numbers::pi / 180.0;
  const cv::Point tip(static_cast<int>(std::lround(centre.x + 0.9 * axes.width * std::cos(a))),
                      static_cast<int>(std::lround(centre.y + 0.9 * axes.width * std::sin(a))));
  const cv::Point base(static_cast<int>(std::lround(centre.x - 0.9 * axes.width * std::cos(a))),
                       static_cast<int>(std::lround(centre.y - 0.9 * axes.width * std::sin(a))));
  cv::line(sample.image, base, tip, bgr(110, 180, 80), 2, cv::LINE_8);

  switch (label) {
    case Label::healthy:
      break;
    case Label::rust: {
      const int spots = rng.uniform_int(24, 32);
      for (int i = 0; i < spots; ++i) {
        const cv::Point p = point_in_ellipse(rng, centre, axes, angle, 0.8);
        const cv::Scalar orange = bgr(jitter(rng, 235, 10), jitter(rng, 130, 15), jitter(rng, 25, 10));
        cv::circle(sample.image, p, rng.uniform_int(7, 10), orange, cv::FILLED, cv::LINE_8);
      }
      break;
    }
    case Label::scab: {
      const int blotches = rng.uniform_int(20, 26);
      for (int i = 0; i < blotches; ++i) {
        const cv::Point p = point_in_ellipse(rng, centre, axes, angle, 0.8);
        const cv::Scalar olive = bgr(jitter(rng, 100, 8), jitter(rng, 88, 8), jitter(rng, 50, 8));
        cv::circle(sample.image, p, rng.uniform_int(7, 10), olive, cv::FILLED, cv::LINE_8);
        const cv::Point q(p.x + rng.uniform_int(-7, 7), p.y + rng.uniform_int(-7, 7));
        cv::circle(sample.image, q, rng.uniform_int(6, 9), olive, cv::FILLED, cv::LINE_8);
      }
      break;
    }
  }

  add_noise(sample.image, rng, 5.0);
  return sample;
}

fs::path label_table_path(const fs::path& corpus_dir) { return corpus_dir / "train.csv"; }
fs::path image_dir(const fs::path& corpus_dir) { return corpus_dir / "images"; }
fs::path gt_mask_path(const fs::path& corpus_dir, const std::string& image_id) {
  return corpus_dir / "gt_masks" / (image_id + "_mask.png");
}

CorpusSummary generate_corpus(std::size_t n_per_class, std::uint64_t seed, const fs::path& out_dir,
                              cv::Size size) {
  if (n_per_class < 1) {
    throw UsageError("synthetic corpus needs at least one image per class");
  }
  std::error_code ec;
  fs::create_directories(image_dir(out_dir), ec);
  fs::create_directories(out_dir / "gt_masks", ec);
  if (ec || !fs::is_directory(image_dir(out_dir))) {
    throw DataError("cannot create synthetic corpus directory " + out_dir.string());
  }

  std::vector<LabeledImageRecord> records;
  const std::size_t total = n_per_class * kNumClasses;
  records.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const Label label = kAllLabels[i % kNumClasses];
    const std::string id = fmt::format("Synth_{:05d}", i);
    const Sample sample = render(label, derive_seed(seed, static_cast<std::uint64_t>(i)), size);
    const fs::path path = image_dir(out_dir) / (id + ".png");
    write_image(path, sample.image);
    cv::Mat mask255;
    sample.leaf_mask.convertTo(mask255, CV_8U, 255.0);
    write_image(gt_mask_path(out_dir, id), mask255);
    records.push_back({id, path, label, Split::unassigned});
  }
  write_label_table(label_table_path(out_dir), records);
  return summarize(records, seed);
}

}  // namespace leafbg::synthetic
