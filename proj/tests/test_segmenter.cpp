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

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "leafbg/error.hpp"
#include "leafbg/io.hpp"
#include "leafbg/segmenter.hpp"
#include "leafbg/synthetic.hpp"
#include "test_util.hpp"

namespace leafbg {
namespace {

using testing::random_image;
using testing::TempDir;

ForegroundMask random_mask(Rng& rng, int width, int height, double p) {
  cv::Mat m(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      m.at<uchar>(y, x) = rng.bernoulli(p) ? 1 : 0;
    }
  }
  return {m, "random"};
}

ForegroundMask mask_with_fraction(double fraction, const std::string& id) {
  // 100x100, first round(fraction*10000) pixels set
  cv::Mat m = cv::Mat::zeros(100, 100, CV_8UC1);
  const int on = static_cast<int>(std::lround(fraction * 10000));
  for (int i = 0; i < on; ++i) {
    m.at<uchar>(i / 100, i % 100) = 1;
  }
  return {m, id};
}

double iou(const cv::Mat& a, const cv::Mat& b) {
  const double inter = cv::countNonZero(a & b);
  const double uni = cv::countNonZero(a | b);
  return uni == 0 ? 1.0 : inter / uni;
}

// --- ForegroundMask -------------------------------------------------------

TEST(ForegroundMaskTest, FractionIsExact) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const int w = 8 + static_cast<int>(rng.below(50));
    const int h = 8 + static_cast<int>(rng.below(50));
    const auto m = random_mask(rng, w, h, rng.uniform());
    std::size_t ones = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        ones += m.values().at<uchar>(y, x);
      }
    }
    EXPECT_EQ(m.foreground_pixels(), ones);
    EXPECT_EQ(m.foreground_fraction(), static_cast<double>(ones) / (w * h));
  }
}

TEST(ForegroundMaskTest, RejectsNonBinary) {
  cv::Mat m = cv::Mat::zeros(8, 8, CV_8UC1);
  m.at<uchar>(2, 2) = 255;
  EXPECT_THROW(ForegroundMask(m, "x"), UsageError);
  EXPECT_NO_THROW(ForegroundMask::from_nonzero(m, "x"));
  EXPECT_EQ(ForegroundMask::from_nonzero(m, "x").foreground_pixels(), 1U);
}

TEST(ForegroundMaskTest, PngRoundTrip) {
  TempDir dir;
  Rng rng(2);
  const auto m = random_mask(rng, 31, 17, 0.3);
  write_mask_png(m, dir / "m.png");
  const cv::Mat raw = cv::imread((dir / "m.png").string(), cv::IMREAD_UNCHANGED);
  ASSERT_EQ(raw.type(), CV_8UC1);
  double hi = 0;
  cv::minMaxLoc(raw, nullptr, &hi);
  EXPECT_EQ(hi, 255.0);
  const auto back = read_mask_png(dir / "m.png", "random");
  EXPECT_EQ(cv::countNonZero(back.values() != m.values()), 0);
  EXPECT_EQ(mask_file_name("abc"), "abc_mask.png");
  EXPECT_EQ(segmented_file_name("abc"), "abc_fg.png");
}

// --- apply_mask -----------------------------------------------------------

TEST(ApplyMask, AllOnesIsIdentity) {
  Rng rng(3);
  const cv::Mat img = random_image(rng, 40, 30);
  const ForegroundMask ones(cv::Mat::ones(30, 40, CV_8UC1), "x");
  EXPECT_EQ(cv::norm(apply_mask(img, ones), img, cv::NORM_INF), 0.0);
}

TEST(ApplyMask, AllZerosIsBlack) {
  Rng rng(4);
  const cv::Mat img = random_image(rng, 40, 30);
  const ForegroundMask zeros(cv::Mat::zeros(30, 40, CV_8UC1), "x");
  EXPECT_EQ(cv::countNonZero(apply_mask(img, zeros).reshape(1)), 0);
}

TEST(ApplyMask, CheckerboardMatchesPixelLoop) {
  Rng rng(5);
  const cv::Mat img = random_image(rng, 37, 23);
  cv::Mat m(23, 37, CV_8UC1);
  for (int y = 0; y < 23; ++y) {
    for (int x = 0; x < 37; ++x) {
      m.at<uchar>(y, x) = static_cast<uchar>((x + y) % 2);
    }
  }
  const cv::Vec3b fill(9, 99, 199);
  const cv::Mat out = apply_mask(img, ForegroundMask(m, "x"), fill);
  for (int y = 0; y < 23; ++y) {
    for (int x = 0; x < 37; ++x) {
      const cv::Vec3b expected = (x + y) % 2 == 1 ? img.at<cv::Vec3b>(y, x) : fill;
      ASSERT_EQ(out.at<cv::Vec3b>(y, x), expected) << x << "," << y;
    }
  }
}

TEST(ApplyMask, Idempotent) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const int w = 8 + static_cast<int>(rng.below(40));
    const int h = 8 + static_cast<int>(rng.below(40));
    const cv::Mat img = random_image(rng, w, h);
    const auto m = random_mask(rng, w, h, rng.uniform());
    const cv::Vec3b fill(static_cast<uchar>(rng.below(256)), 0, static_cast<uchar>(rng.below(256)));
    const cv::Mat once = apply_mask(img, m, fill);
    const cv::Mat twice = apply_mask(once, m, fill);
    ASSERT_EQ(cv::norm(once, twice, cv::NORM_INF), 0.0);
  }
}

TEST(ApplyMask, DimensionMismatch) {
  const cv::Mat img(20, 20, CV_8UC3, cv::Scalar::all(5));
  const ForegroundMask m(cv::Mat::ones(20, 21, CV_8UC1), "x");
  EXPECT_THROW(apply_mask(img, m), UsageError);
}

// --- gate -----------------------------------------------------------------

TEST(Gate, AllZeroRejected) {
  const auto v = gate(mask_with_fraction(0.0, "a"), {0.05, 0.95}, {});
  EXPECT_FALSE(v.accepted());
  EXPECT_EQ(v.reasons, (std::vector{GateReason::empty_foreground, GateReason::fraction_out_of_bounds}));
}

TEST(Gate, AllOneRejected) {
  const auto v = gate(mask_with_fraction(1.0, "a"), {0.05, 0.95}, {});
  EXPECT_EQ(v.reasons, (std::vector{GateReason::full_foreground, GateReason::fraction_out_of_bounds}));
}

TEST(Gate, DegenerateAlwaysRejectedWhateverBounds) {
  // Even with bounds covering [0,1] the empty/full reasons fire.
  EXPECT_FALSE(gate(mask_with_fraction(0.0, "a"), {0.0, 1.0}, {}).accepted());
  EXPECT_FALSE(gate(mask_with_fraction(1.0, "a"), {0.0, 1.0}, {}).accepted());
}

TEST(Gate, InBoundsAccepted) {
  const auto v = gate(mask_with_fraction(0.40, "a"), {0.05, 0.95}, {});
  EXPECT_TRUE(v.accepted());
  EXPECT_TRUE(v.reasons.empty());
}

TEST(Gate, ManualReject) {
  const auto v = gate(mask_with_fraction(0.50, "listed"), {0.05, 0.95}, {"listed", "other"});
  EXPECT_EQ(v.reasons, std::vector{GateReason::manual_reject});
}

TEST(Gate, BoundsAreInclusive) {
  EXPECT_TRUE(gate(mask_with_fraction(0.05, "a"), {0.05, 0.95}, {}).accepted());
  EXPECT_TRUE(gate(mask_with_fraction(0.95, "a"), {0.05, 0.95}, {}).accepted());
  EXPECT_FALSE(gate(mask_with_fraction(0.0499, "a"), {0.05, 0.95}, {}).accepted());
}

TEST(Gate, InvalidBounds) {
  EXPECT_THROW(gate(mask_with_fraction(0.5, "a"), {0.5, 0.5}, {}), UsageError);
  EXPECT_THROW(gate(mask_with_fraction(0.5, "a"), {0.9, 0.1}, {}), UsageError);
}

TEST(Gate, PureAndAcceptedIffNoReasons) {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const auto m = random_mask(rng, 8 + static_cast<int>(rng.below(8)), 8, rng.uniform() < 0.1 ? 0.0 : rng.uniform());
    const double lo = rng.uniform(0.0, 0.5);
    const GateBounds b{lo, lo + rng.uniform(0.01, 0.5)};
    const std::set<std::string> rejects = rng.bernoulli(0.3) ? std::set<std::string>{"random"}
                                                             : std::set<std::string>{};
    const auto v1 = gate(m, b, rejects);
    EXPECT_EQ(v1, gate(m, b, rejects));
    EXPECT_EQ(v1.accepted(), v1.reasons.empty());
  }
}

TEST(Gate, ReasonNamesRoundTrip) {
  for (GateReason r : {GateReason::empty_foreground, GateReason::full_foreground,
                       GateReason::fraction_out_of_bounds, GateReason::manual_reject}) {
    EXPECT_EQ(parse_gate_reason(to_string(r)), r);
  }
  EXPECT_THROW(parse_gate_reason("nope"), DataError);
}

TEST(Gate, RejectListFile) {
  TempDir dir;
  write_text_file(dir / "rejects.txt", "# bad masks\nimg_1\n\n  img_2  \n");
  EXPECT_EQ(read_reject_list(dir / "rejects.txt"), (std::set<std::string>{"img_1", "img_2"}));
}

// --- baseline backend -----------------------------------------------------

TEST(Baseline, UniformImageIsDegenerateAndGated) {
  const cv::Mat img(64, 64, CV_8UC3, cv::Scalar(90, 140, 60));
  Segmenter seg({BackendKind::color_index_baseline, std::nullopt});
  const auto m = seg.segment(img, "flat");
  EXPECT_TRUE(m.foreground_pixels() == 0 || m.foreground_pixels() == 64U * 64U);
  EXPECT_FALSE(gate(m, {}, {}).accepted());
}

TEST(Baseline, BinaryDeterministicAndSourceSized) {
  Segmenter seg({BackendKind::color_index_baseline, std::nullopt});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = synthetic::render(kAllLabels[seed % 3], seed);
    const auto a = seg.segment(s.image, "x");
    const auto b = seg.segment(s.image.clone(), "x");
    EXPECT_EQ(a.width(), s.image.cols);
    EXPECT_EQ(a.height(), s.image.rows);
    EXPECT_EQ(cv::countNonZero(a.values() > 1), 0);
    EXPECT_EQ(cv::countNonZero(a.values() != b.values()), 0);
    EXPECT_GE(a.foreground_fraction(), 0.0);
    EXPECT_LE(a.foreground_fraction(), 1.0);
  }
}

TEST(Baseline, IoUAgainstGeneratorEllipse) {
  Segmenter seg({BackendKind::color_index_baseline, std::nullopt});
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Label label = kAllLabels[seed % 3];
    const auto s = synthetic::render(label, derive_seed(99, seed));
    const auto m = seg.segment(s.image, "x");
    EXPECT_GE(iou(m.values(), s.leaf_mask), 0.9) << to_string(label) << " seed " << seed;
  }
}

TEST(SegmenterTest, InputValidation) {
  Segmenter seg({BackendKind::color_index_baseline, std::nullopt});
  EXPECT_THROW(seg.segment(cv::Mat(7, 20, CV_8UC3, cv::Scalar::all(1)), "x"), DataError);
  EXPECT_THROW(seg.segment(cv::Mat(20, 20, CV_8UC1, cv::Scalar::all(1)), "x"), DataError);
  EXPECT_THROW(Segmenter({BackendKind::color_index_baseline, std::nullopt}, 1.0), UsageError);
  EXPECT_THROW(Segmenter({BackendKind::color_index_baseline, std::nullopt}, 0.0), UsageError);
  EXPECT_THROW(seg.saliency_map(cv::Mat(20, 20, CV_8UC3)), UsageError);
}

TEST(SegmenterTest, BackendNames) {
  EXPECT_EQ(parse_backend_kind("baseline"), BackendKind::color_index_baseline);
  EXPECT_EQ(parse_backend_kind("salient"), BackendKind::salient_model);
  EXPECT_EQ(parse_backend_kind(to_string(BackendKind::salient_model)), BackendKind::salient_model);
  EXPECT_THROW(parse_backend_kind("grabcut"), UsageError);
  EXPECT_THROW((SegmenterBackendId{BackendKind::salient_model, std::nullopt}.validate()), UsageError);
}

// --- salient backend ------------------------------------------------------

TEST(Salient, MissingModelIsRuntimeFailure) {
  EXPECT_THROW(Segmenter({BackendKind::salient_model, std::filesystem::path("/nonexistent/u2net.onnx")}),
               RuntimeFailure);
}

TEST(Salient, CorruptModelIsRuntimeFailure) {
  TempDir dir;
  write_text_file(dir / "broken.onnx", "this is not an onnx file\n");
  EXPECT_THROW(Segmenter({BackendKind::salient_model, dir / "broken.onnx"}), RuntimeFailure);
}

TEST(Salient, FixtureModelSegmentsSyntheticLeaves) {
  const auto fixtures = testing::onnx_fixture_dir();
  if (fixtures.empty()) {
    GTEST_SKIP() << "torch/onnx fixtures not generated";
  }
  Segmenter seg({BackendKind::salient_model, fixtures / "saliency_exg.onnx"}, 0.5);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto s = synthetic::render(Label::healthy, derive_seed(5, seed));
    const cv::Mat map = seg.saliency_map(s.image);
    ASSERT_EQ(map.size(), s.image.size());
    double lo = 0;
    double hi = 0;
    cv::minMaxLoc(map, &lo, &hi);
    EXPECT_GE(lo, 0.0);
    EXPECT_LE(hi, 1.0 + 1e-6);
    const auto m = seg.segment(s.image, "x");
    EXPECT_EQ(m.width(), s.image.cols);
    EXPECT_GE(iou(m.values(), s.leaf_mask), 0.8) << seed;
  }
}

}  // namespace
}  // namespace leafbg
