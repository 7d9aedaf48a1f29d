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
#include <memory>
#include <string>
#include <vector>

#include <opencv2/dnn.hpp>

#include "leafbg/archive.hpp"
#include "leafbg/layers.hpp"
#include "leafbg/preprocess.hpp"

namespace leafbg {

/// Spatial feature map stored as (height*width) x channels, positions row-major.
struct FeatureMap {
  int height = 0;
  int width = 0;
  nn::Matrix values;

  Eigen::Index channels() const { return values.cols(); }
};

enum class TrunkKind { onnx, patch_color };

std::string_view to_string(TrunkKind kind) noexcept;
TrunkKind parse_trunk_kind(std::string_view text);

inline constexpr int kTrunkChannels = 160;
inline constexpr int kExpandedChannels = 960;
inline constexpr int kBlockOutChannels = 320;
inline constexpr int kBackboneFeatures = 1280;
inline constexpr int kFeatureGrid = 7;
/// Tail stages after the trunk: the last inverted-residual block and the final 1x1 conv.
inline constexpr int kTailStages = 2;

/// MobileNetV2-class feature extractor.
///
/// `onnx`: `bundle_dir` holds `trunk.onnx` (input 1x3x224x224 in [0,1], output
/// 1x160x7x7) and `tail.lbgt` (weights of the last inverted-residual block and
/// the final 1x1 conv; meta.pretrained marks ImageNet weights).
/// `patch_color`: an offline stand-in trunk built from per-patch colour
/// statistics; its tail is always randomly initialised.
struct BackboneSpec {
  TrunkKind kind = TrunkKind::onnx;
  std::filesystem::path bundle_dir;
  /// Number of trailing tail stages that train (0, 1 or 2). Everything before is frozen.
  int freeze_boundary = 2;
  /// Permit a seeded random tail when no pretrained weights are available.
  bool allow_random_init = false;
  std::uint64_t init_seed = 0;
};

class Trunk {
 public:
  virtual ~Trunk() = default;
  /// Input is a 224x224 RGB tensor in [0,1]; output is 7x7x160.
  virtual FeatureMap forward(const ImageTensor& input) = 0;
  virtual std::size_t parameter_count() const = 0;
  /// Parameters owned by this object (empty when they live inside a model file).
  virtual std::vector<nn::Parameter*> parameters() { return {}; }
};

class OnnxTrunk final : public Trunk {
 public:
  explicit OnnxTrunk(const std::filesystem::path& model_path);
  FeatureMap forward(const ImageTensor& input) override;
  std::size_t parameter_count() const override { return parameter_count_; }

 private:
  cv::dnn::Net net_;
  std::size_t parameter_count_ = 0;
};

/// 32x32 patches -> 40 colour statistics (RGB mean/std, 18-bin hue histogram of
/// saturated pixels, 8-bin saturation and value histograms) -> fixed seeded
/// sparse projection to 160 channels (no activation, as at a linear bottleneck).
class PatchColorTrunk final : public Trunk {
 public:
  static constexpr int kDescriptorSize = 40;
  /// Hue-histogram scale. Small chromatic regions (lesions) would otherwise be
  /// swamped by the mean-colour terms once projected.
  static constexpr double kHueGain = 20.0;

  explicit PatchColorTrunk(std::uint64_t seed);
  FeatureMap forward(const ImageTensor& input) override;
  std::size_t parameter_count() const override;
  std::vector<nn::Parameter*> parameters() override { return {&projection_, &bias_}; }

  /// Colour statistics of one square patch; exposed for tests.
  static Eigen::VectorXd describe_patch(const ImageTensor& input, int y0, int x0, int size);

 private:
  nn::Parameter projection_;
  nn::Parameter bias_;
};

/// One trainable-or-frozen block after the trunk.
class TailStage {
 public:
  struct Cache {
    std::vector<nn::Matrix> tensors;
  };

  virtual ~TailStage() = default;
  virtual FeatureMap forward(const FeatureMap& input, Cache* cache) const = 0;
  /// Accumulates parameter gradients; returns dL/dinput when requested.
  virtual nn::Matrix backward(const Cache& cache, const nn::Matrix& dy, int height, int width,
                              bool need_input_grad) = 0;
  virtual std::vector<nn::Parameter*> parameters() = 0;
  virtual void set_trainable(bool trainable) = 0;
  virtual void random_init(Rng& rng) = 0;
};

/// Expand 1x1 (160->960) + BN + ReLU6, depthwise 3x3 + BN + ReLU6, project 1x1 (960->320) + BN.
class InvertedResidualStage final : public TailStage {
 public:
  explicit InvertedResidualStage(double bn_epsilon);
  FeatureMap forward(const FeatureMap& input, Cache* cache) const override;
  nn::Matrix backward(const Cache& cache, const nn::Matrix& dy, int height, int width,
                      bool need_input_grad) override;
  std::vector<nn::Parameter*> parameters() override;
  void set_trainable(bool trainable) override;
  void random_init(Rng& rng) override;

 private:
  nn::PointwiseConv expand_;
  nn::FrozenStatsBatchNorm expand_bn_;
  nn::DepthwiseConv3x3 depthwise_;
  nn::FrozenStatsBatchNorm depthwise_bn_;
  nn::PointwiseConv project_;
  nn::FrozenStatsBatchNorm project_bn_;
};

/// 1x1 conv (320->1280) + BN + ReLU6.
class FinalConvStage final : public TailStage {
 public:
  explicit FinalConvStage(double bn_epsilon);
  FeatureMap forward(const FeatureMap& input, Cache* cache) const override;
  nn::Matrix backward(const Cache& cache, const nn::Matrix& dy, int height, int width,
                      bool need_input_grad) override;
  std::vector<nn::Parameter*> parameters() override;
  void set_trainable(bool trainable) override;
  void random_init(Rng& rng) override;

 private:
  nn::PointwiseConv conv_;
  nn::FrozenStatsBatchNorm bn_;
};

class Backbone {
 public:
  /// Loads the trunk and tail weights. Throws RuntimeFailure if the bundle is
  /// missing, or if weights are not pretrained and allow_random_init is false.
  /// With `load_tail_weights` false the tail is left randomly initialised (used
  /// when a checkpoint will overwrite it).
  explicit Backbone(BackboneSpec spec, bool load_tail_weights = true);

  const BackboneSpec& spec() const { return spec_; }

  /// Full 7x7x1280 feature map before pooling, inference only.
  FeatureMap features(const ImageTensor& input);

  /// Trunk plus all frozen tail stages.
  FeatureMap frozen_prefix(const ImageTensor& input);

  /// Runs the trainable tail stages; fills one cache per stage when `caches` is non-null.
  FeatureMap trainable_forward(const FeatureMap& input, std::vector<TailStage::Cache>* caches) const;
  void trainable_backward(const std::vector<TailStage::Cache>& caches, const nn::Matrix& dy, int height,
                          int width);

  /// Tail parameters (trainable and frozen) plus trunk parameters the model owns.
  std::vector<nn::Parameter*> parameters();
  std::size_t trainable_parameter_count();
  std::size_t total_parameter_count();
  bool pretrained() const { return pretrained_; }

 private:
  BackboneSpec spec_;
  std::unique_ptr<Trunk> trunk_;
  std::vector<std::unique_ptr<TailStage>> tail_;
  bool pretrained_ = false;
};

}  // namespace leafbg
