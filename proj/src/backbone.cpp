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

#include "leafbg/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "leafbg/error.hpp"
#include "leafbg/random.hpp"

namespace leafbg {

namespace fs = std::filesystem;
using nn::Matrix;

std::string_view to_string(TrunkKind kind) noexcept {
  return kind == TrunkKind::onnx ? "onnx" : "patch_color";
}

TrunkKind parse_trunk_kind(std::string_view text) {
  if (text == "onnx") {
    return TrunkKind::onnx;
  }
  if (text == "patch_color") {
    return TrunkKind::patch_color;
  }
  throw UsageError("unknown backbone kind '" + std::string(text) + "' (expected onnx or patch_color)");
}

// --- OnnxTrunk ---------------------------------------------------------------

OnnxTrunk::OnnxTrunk(const fs::path& model_path) {
  if (!fs::is_regular_file(model_path)) {
    throw RuntimeFailure("backbone trunk model not found: " + model_path.string());
  }
  try {
    net_ = cv::dnn::readNetFromONNX(model_path.string());
  } catch (const cv::Exception& e) {
    throw RuntimeFailure("cannot load backbone trunk " + model_path.string() + ": " + e.what());
  }
  net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
  net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
  for (const auto& name : net_.getLayerNames()) {
    const auto layer = net_.getLayer(net_.getLayerId(name));
    for (const auto& blob : layer->blobs) {
      parameter_count_ += blob.total();
    }
  }
}

FeatureMap OnnxTrunk::forward(const ImageTensor& input) {
  cv::Mat image(input.height, input.width, CV_32FC3);
  std::size_t k = 0;
  for (int y = 0; y < input.height; ++y) {
    auto* row = image.ptr<cv::Vec3f>(y);
    for (int x = 0; x < input.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        row[x][c] = static_cast<float>(input.data[k++]);
      }
    }
  }
  cv::Mat output;
  try {
    net_.setInput(cv::dnn::blobFromImage(image));
    output = net_.forward();
  } catch (const cv::Exception& e) {
    throw RuntimeFailure(std::string("backbone trunk inference failed: ") + e.what());
  }
  if (output.dims != 4 || output.size[0] != 1) {
    throw RuntimeFailure("backbone trunk must output a 1xCxHxW tensor");
  }
  const int channels = output.size[1];
  FeatureMap map{output.size[2], output.size[3], Matrix(output.size[2] * output.size[3], channels)};
  const float* src = output.ptr<float>();
  const Eigen::Index positions = map.values.rows();
  for (int c = 0; c < channels; ++c) {
    for (Eigen::Index p = 0; p < positions; ++p) {
      map.values(p, c) = src[c * positions + p];
    }
  }
  return map;
}

// --- PatchColorTrunk ---------------------------------------------------------

PatchColorTrunk::PatchColorTrunk(std::uint64_t seed)
    : projection_("trunk.patch_color.projection", {kTrunkChannels, kDescriptorSize}, false),
      bias_("trunk.patch_color.bias", {kTrunkChannels}, false) {
  // Very sparse random projection: each channel reads about four descriptor
  // entries, so some channels track a single colour band on their own.
  Rng rng(seed);
  const double keep = 0.1;
  for (Eigen::Index i = 0; i < projection_.size(); ++i) {
    projection_.value[i] = rng.bernoulli(keep) ? rng.normal() : 0.0;
  }
  for (Eigen::Index i = 0; i < bias_.size(); ++i) {
    bias_.value[i] = 0.1 * rng.normal();
  }
}

std::size_t PatchColorTrunk::parameter_count() const {
  return static_cast<std::size_t>(projection_.size() + bias_.size());
}

Eigen::VectorXd PatchColorTrunk::describe_patch(const ImageTensor& input, int y0, int x0, int size) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(kDescriptorSize);
  const double n = static_cast<double>(size) * size;
  double sum[3] = {0, 0, 0};
  double sum_sq[3] = {0, 0, 0};
  for (int y = y0; y < y0 + size; ++y) {
    for (int x = x0; x < x0 + size; ++x) {
      const double r = input.at(y, x, 0);
      const double g = input.at(y, x, 1);
      const double b = input.at(y, x, 2);
      const double rgb[3] = {r, g, b};
      for (int c = 0; c < 3; ++c) {
        sum[c] += rgb[c];
        sum_sq[c] += rgb[c] * rgb[c];
      }
      const double hi = std::max({r, g, b});
      const double lo = std::min({r, g, b});
      const double chroma = hi - lo;
      const double sat = hi > 0.0 ? chroma / hi : 0.0;
      if (sat >= 0.25 && hi >= 0.2 && chroma > 0.0) {
        double hue = 0.0;
        if (hi == r) {
          hue = std::fmod((g - b) / chroma + 6.0, 6.0);
        } else if (hi == g) {
          hue = (b - r) / chroma + 2.0;
        } else {
          hue = (r - g) / chroma + 4.0;
        }
        const int bin = std::min(17, static_cast<int>(hue * 3.0));  // 20 degree bins
        d[6 + bin] += kHueGain / n;
      }
      d[24 + std::min(7, static_cast<int>(sat * 8.0))] += 1.0 / n;
      d[32 + std::min(7, static_cast<int>(hi * 8.0))] += 1.0 / n;
    }
  }
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[c] / n;
    d[c] = mean;
    d[3 + c] = std::sqrt(std::max(0.0, sum_sq[c] / n - mean * mean));
  }
  return d;
}

FeatureMap PatchColorTrunk::forward(const ImageTensor& input) {
  if (input.height != input.width || input.height % kFeatureGrid != 0) {
    throw UsageError("patch_color trunk needs a square input divisible by 7");
  }
  const int patch = input.height / kFeatureGrid;
  FeatureMap map{kFeatureGrid, kFeatureGrid, Matrix(kFeatureGrid * kFeatureGrid, kTrunkChannels)};
  const auto w = projection_.as_matrix(kTrunkChannels, kDescriptorSize);
  for (int gy = 0; gy < kFeatureGrid; ++gy) {
    for (int gx = 0; gx < kFeatureGrid; ++gx) {
      const Eigen::VectorXd d = describe_patch(input, gy * patch, gx * patch, patch);
      // Linear, like the bottleneck output it stands in for.
      const Eigen::VectorXd y = w * d + bias_.value;
      map.values.row(gy * kFeatureGrid + gx) = y.transpose();
    }
  }
  return map;
}

// --- tail stages -------------------------------------------------------------

InvertedResidualStage::InvertedResidualStage(double bn_epsilon)
    : expand_("tail.block.expand.weight", kTrunkChannels, kExpandedChannels),
      expand_bn_("tail.block.expand_bn", kExpandedChannels, bn_epsilon),
      depthwise_("tail.block.depthwise.weight", kExpandedChannels),
      depthwise_bn_("tail.block.depthwise_bn", kExpandedChannels, bn_epsilon),
      project_("tail.block.project.weight", kExpandedChannels, kBlockOutChannels),
      project_bn_("tail.block.project_bn", kBlockOutChannels, bn_epsilon) {}

// cache layout: x, e, a1, h1, d, a2, h2, p
FeatureMap InvertedResidualStage::forward(const FeatureMap& input, Cache* cache) const {
  if (input.channels() != kTrunkChannels) {
    throw UsageError("inverted-residual stage expects 160 input channels");
  }
  Matrix e = expand_.forward(input.values);
  Matrix a1 = expand_bn_.forward(e);
  Matrix h1 = nn::relu6(a1);
  Matrix d = depthwise_.forward(h1, input.height, input.width);
  Matrix a2 = depthwise_bn_.forward(d);
  Matrix h2 = nn::relu6(a2);
  Matrix p = project_.forward(h2);
  FeatureMap out{input.height, input.width, project_bn_.forward(p)};
  if (cache != nullptr) {
    cache->tensors = {input.values, std::move(e), std::move(a1), std::move(h1),
                      std::move(d),  std::move(a2), std::move(h2), std::move(p)};
  }
  return out;
}

Matrix InvertedResidualStage::backward(const Cache& cache, const Matrix& dy, int height, int width,
                                       bool need_input_grad) {
  const auto& t = cache.tensors;
  Matrix g = project_bn_.backward(t[7], dy);
  g = project_.backward(t[6], g, true);
  g = nn::relu6_backward(t[5], g);
  g = depthwise_bn_.backward(t[4], g);
  g = depthwise_.backward(t[3], g, height, width, true);
  g = nn::relu6_backward(t[2], g);
  g = expand_bn_.backward(t[1], g);
  return expand_.backward(t[0], g, need_input_grad);
}

std::vector<nn::Parameter*> InvertedResidualStage::parameters() {
  std::vector<nn::Parameter*> params{&expand_.weight()};
  for (auto* p : expand_bn_.parameters()) params.push_back(p);
  params.push_back(&depthwise_.weight());
  for (auto* p : depthwise_bn_.parameters()) params.push_back(p);
  params.push_back(&project_.weight());
  for (auto* p : project_bn_.parameters()) params.push_back(p);
  return params;
}

void InvertedResidualStage::set_trainable(bool trainable) {
  expand_.weight().trainable = trainable;
  depthwise_.weight().trainable = trainable;
  project_.weight().trainable = trainable;
  expand_bn_.set_trainable(trainable);
  depthwise_bn_.set_trainable(trainable);
  project_bn_.set_trainable(trainable);
}

void InvertedResidualStage::random_init(Rng& rng) {
  expand_.he_init(rng);
  depthwise_.he_init(rng);
  project_.he_init(rng);
}

FinalConvStage::FinalConvStage(double bn_epsilon)
    : conv_("tail.final.conv.weight", kBlockOutChannels, kBackboneFeatures),
      bn_("tail.final.bn", kBackboneFeatures, bn_epsilon) {}

// cache layout: x, c, a
FeatureMap FinalConvStage::forward(const FeatureMap& input, Cache* cache) const {
  if (input.channels() != kBlockOutChannels) {
    throw UsageError("final conv stage expects 320 input channels");
  }
  Matrix c = conv_.forward(input.values);
  Matrix a = bn_.forward(c);
  FeatureMap out{input.height, input.width, nn::relu6(a)};
  if (cache != nullptr) {
    cache->tensors = {input.values, std::move(c), std::move(a)};
  }
  return out;
}

Matrix FinalConvStage::backward(const Cache& cache, const Matrix& dy, int /*height*/, int /*width*/,
                                bool need_input_grad) {
  const auto& t = cache.tensors;
  Matrix g = nn::relu6_backward(t[2], dy);
  g = bn_.backward(t[1], g);
  return conv_.backward(t[0], g, need_input_grad);
}

std::vector<nn::Parameter*> FinalConvStage::parameters() {
  std::vector<nn::Parameter*> params{&conv_.weight()};
  for (auto* p : bn_.parameters()) params.push_back(p);
  return params;
}

void FinalConvStage::set_trainable(bool trainable) {
  conv_.weight().trainable = trainable;
  bn_.set_trainable(trainable);
}

void FinalConvStage::random_init(Rng& rng) { conv_.he_init(rng); }

// --- Backbone ----------------------------------------------------------------

Backbone::Backbone(BackboneSpec spec, bool load_tail_weights) : spec_(std::move(spec)) {
  if (spec_.freeze_boundary < 0 || spec_.freeze_boundary > kTailStages) {
    throw UsageError("freeze_boundary must be 0, 1 or 2 (trainable trailing tail stages)");
  }

  double bn_epsilon = 1e-5;
  TensorArchive tail_weights;
  if (spec_.kind == TrunkKind::onnx) {
    const fs::path trunk_path = spec_.bundle_dir / "trunk.onnx";
    const fs::path tail_path = spec_.bundle_dir / "tail.lbgt";
    if (!fs::is_regular_file(trunk_path) || !fs::is_regular_file(tail_path)) {
      throw RuntimeFailure("missing pretrained backbone: expected trunk.onnx and tail.lbgt in '" +
                           spec_.bundle_dir.string() + "' (see tools/export_backbone.py)");
    }
    tail_weights = read_archive(tail_path);
    pretrained_ = tail_weights.meta.value("pretrained", false);
    bn_epsilon = tail_weights.meta.value("bn_epsilon", 1e-5);
    if (!pretrained_ && !spec_.allow_random_init) {
      throw RuntimeFailure("backbone bundle '" + spec_.bundle_dir.string() +
                           "' does not hold pretrained weights; set backbone.allow_random_init=true "
                           "to use it anyway");
    }
    trunk_ = std::make_unique<OnnxTrunk>(trunk_path);
  } else {
    if (!spec_.allow_random_init) {
      throw RuntimeFailure(
          "the patch_color backbone has no pretrained weights; it requires "
          "backbone.allow_random_init=true");
    }
    trunk_ = std::make_unique<PatchColorTrunk>(derive_seed(spec_.init_seed, "patch_color"));
  }

  tail_.push_back(std::make_unique<InvertedResidualStage>(bn_epsilon));
  tail_.push_back(std::make_unique<FinalConvStage>(bn_epsilon));
  Rng rng(derive_seed(spec_.init_seed, "tail"));
  for (auto& stage : tail_) {
    stage->random_init(rng);
  }
  if (spec_.kind == TrunkKind::onnx && load_tail_weights) {
    for (auto& stage : tail_) {
      for (nn::Parameter* p : stage->parameters()) {
        const Tensor& t = tail_weights.at(p->name);
        if (t.shape != p->shape) {
          throw DataError("tail tensor '" + p->name + "' has an unexpected shape");
        }
        p->value = Eigen::Map<const Eigen::VectorXd>(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
      }
    }
  }
  for (int i = 0; i < kTailStages; ++i) {
    tail_[static_cast<std::size_t>(i)]->set_trainable(i >= kTailStages - spec_.freeze_boundary);
  }
}

FeatureMap Backbone::frozen_prefix(const ImageTensor& input) {
  FeatureMap map = trunk_->forward(input);
  for (int i = 0; i < kTailStages - spec_.freeze_boundary; ++i) {
    map = tail_[static_cast<std::size_t>(i)]->forward(map, nullptr);
  }
  return map;
}

FeatureMap Backbone::trainable_forward(const FeatureMap& input,
                                       std::vector<TailStage::Cache>* caches) const {
  FeatureMap map = input;
  if (caches != nullptr) {
    caches->assign(static_cast<std::size_t>(spec_.freeze_boundary), {});
  }
  for (int k = 0; k < spec_.freeze_boundary; ++k) {
    const auto i = static_cast<std::size_t>(kTailStages - spec_.freeze_boundary + k);
    map = tail_[i]->forward(map, caches != nullptr ? &(*caches)[static_cast<std::size_t>(k)] : nullptr);
  }
  return map;
}

void Backbone::trainable_backward(const std::vector<TailStage::Cache>& caches, const Matrix& dy,
                                  int height, int width) {
  Matrix grad = dy;
  for (int k = spec_.freeze_boundary - 1; k >= 0; --k) {
    const auto i = static_cast<std::size_t>(kTailStages - spec_.freeze_boundary + k);
    grad = tail_[i]->backward(caches[static_cast<std::size_t>(k)], grad, height, width, k > 0);
  }
}

FeatureMap Backbone::features(const ImageTensor& input) {
  return trainable_forward(frozen_prefix(input), nullptr);
}

std::vector<nn::Parameter*> Backbone::parameters() {
  std::vector<nn::Parameter*> params = trunk_->parameters();
  for (auto& stage : tail_) {
    for (auto* p : stage->parameters()) {
      params.push_back(p);
    }
  }
  return params;
}

std::size_t Backbone::trainable_parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) {
    if (p->trainable) {
      n += static_cast<std::size_t>(p->size());
    }
  }
  return n;
}

std::size_t Backbone::total_parameter_count() {
  std::size_t n = 0;
  for (auto& stage : tail_) {
    for (auto* p : stage->parameters()) {
      n += static_cast<std::size_t>(p->size());
    }
  }
  return n + trunk_->parameter_count();
}

}  // namespace leafbg
