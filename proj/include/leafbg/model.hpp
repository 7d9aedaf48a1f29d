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
#include <span>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "leafbg/backbone.hpp"
#include "leafbg/layers.hpp"
#include "leafbg/preprocess.hpp"

namespace leafbg {

/// GAP -> BN -> [Dense(units)/ReLU -> Dropout(rate)]... -> Dense(num_classes)/softmax.
struct HeadSpec {
  int input_features = kBackboneFeatures;
  std::vector<int> dense_units{128, 64};
  double dropout_rate = 0.5;
  int num_classes = 3;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-3;

  void validate() const;
};

nlohmann::json to_json(const HeadSpec& spec);
nlohmann::json to_json(const BackboneSpec& spec);
nlohmann::json to_json(const PreprocessSpec& spec);
HeadSpec head_spec_from_json(const nlohmann::json& j);
BackboneSpec backbone_spec_from_json(const nlohmann::json& j);
PreprocessSpec preprocess_spec_from_json(const nlohmann::json& j);

class ClassificationHead {
 public:
  struct Cache {
    nn::Matrix input;
    nn::BatchNorm1d::Cache bn;
    std::vector<nn::Matrix> dense_inputs;
    std::vector<nn::Matrix> pre_activations;
    std::vector<nn::Matrix> dropout_masks;
  };

  ClassificationHead(const HeadSpec& spec, Rng& init_rng);

  nn::Matrix forward_train(const nn::Matrix& pooled, Rng& dropout_rng, Cache& cache);
  nn::Matrix forward_inference(const nn::Matrix& pooled) const;
  /// Returns d(loss)/d(pooled).
  nn::Matrix backward(const Cache& cache, const nn::Matrix& dlogits);

  std::vector<nn::Parameter*> parameters();

 private:
  HeadSpec spec_;
  nn::BatchNorm1d bn_;
  std::vector<nn::Dense> hidden_;
  nn::Dense output_;
};

/// Backbone + head with an explicit staging point.
///
/// `stage()` runs everything that is frozen (trunk, frozen tail stages, and the
/// global pooling when the whole backbone is frozen). Staged inputs can be
/// cached across epochs because nothing upstream of them ever changes.
class ClassifierModel {
 public:
  ClassifierModel(BackboneSpec backbone, HeadSpec head = {}, PreprocessSpec preprocess = {},
                  bool load_tail_weights = true);

  ClassifierModel(const ClassifierModel&) = delete;
  ClassifierModel& operator=(const ClassifierModel&) = delete;
  ClassifierModel(ClassifierModel&&) = default;
  ClassifierModel& operator=(ClassifierModel&&) = default;

  FeatureMap stage(const ImageTensor& input);
  /// Decodes nothing: `image` is a BGR 8-bit image already in memory.
  FeatureMap stage(const cv::Mat& image);

  /// Inference-mode class probabilities, one row per input.
  nn::Matrix predict(std::span<const ImageTensor> batch);
  nn::Matrix predict_staged(std::span<const FeatureMap* const> batch) const;
  nn::Matrix logits_staged(std::span<const FeatureMap* const> batch) const;

  struct StepResult {
    double loss = 0.0;
    std::size_t correct = 0;
  };
  /// Zeroes gradients, runs a training-mode forward pass (dropout on, batch
  /// statistics in the head BN), and back-propagates mean cross-entropy.
  StepResult forward_backward(std::span<const FeatureMap* const> batch, const std::vector<int>& labels,
                              Rng& dropout_rng);

  std::vector<nn::Parameter*> parameters();
  std::vector<nn::Parameter*> trainable_parameters();
  std::size_t head_trainable_parameter_count();
  std::size_t head_parameter_count();
  std::size_t backbone_trainable_parameter_count() { return backbone_.trainable_parameter_count(); }

  Backbone& backbone() { return backbone_; }
  const HeadSpec& head_spec() const { return head_spec_; }
  const PreprocessSpec& preprocess_spec() const { return preprocess_; }

  /// Description of the architecture (specs), without weights.
  nlohmann::json describe() const;

  /// All parameters (trainable and not) plus `describe()` in the archive meta.
  void save(const std::filesystem::path& path, const nlohmann::json& extra_meta = {});
  static ClassifierModel load(const std::filesystem::path& path);
  /// Overwrites parameter values from an archive written by save().
  void load_parameters(const TensorArchive& archive);

 private:
  nn::Matrix pooled(std::span<const FeatureMap* const> batch) const;

  HeadSpec head_spec_;
  PreprocessSpec preprocess_;
  Backbone backbone_;
  std::unique_ptr<ClassificationHead> head_;
};

}  // namespace leafbg
