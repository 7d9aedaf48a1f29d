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

#include "leafbg/model.hpp"

#include <cmath>

#include "leafbg/archive.hpp"
#include "leafbg/error.hpp"
#include "leafbg/labels.hpp"

namespace leafbg {

using nlohmann::json;
using nn::Matrix;

void HeadSpec::validate() const {
  if (input_features < 1 || num_classes < 2) {
    throw UsageError("head needs positive input features and at least two classes");
  }
  for (int units : dense_units) {
    if (units < 1) {
      throw UsageError("head dense layers need at least one unit");
    }
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw UsageError("dropout rate must lie in [0, 1)");
  }
  if (!(bn_momentum > 0.0 && bn_momentum < 1.0) || !(bn_epsilon > 0.0)) {
    throw UsageError("head batch-norm momentum must lie in (0,1) and epsilon be positive");
  }
}

json to_json(const HeadSpec& s) {
  return {{"pooling", "global_average"},
          {"input_features", s.input_features},
          {"batch_norm", true},
          {"dense_units", s.dense_units},
          {"activation", "relu"},
          {"dropout_rate", s.dropout_rate},
          {"num_classes", s.num_classes},
          {"output_activation", "softmax"},
          {"bn_momentum", s.bn_momentum},
          {"bn_epsilon", s.bn_epsilon}};
}

json to_json(const BackboneSpec& s) {
  return {{"kind", std::string(to_string(s.kind))},
          {"bundle_dir", s.bundle_dir.string()},
          {"freeze_boundary", s.freeze_boundary},
          {"allow_random_init", s.allow_random_init},
          {"init_seed", s.init_seed}};
}

json to_json(const PreprocessSpec& s) {
  return {{"target_size", s.target_size},
          {"interpolation", std::string(to_string(s.interpolation))},
          {"scale", "divide_by_255"}};
}

HeadSpec head_spec_from_json(const json& j) {
  HeadSpec s;
  s.input_features = j.at("input_features");
  s.dense_units = j.at("dense_units").get<std::vector<int>>();
  s.dropout_rate = j.at("dropout_rate");
  s.num_classes = j.at("num_classes");
  s.bn_momentum = j.at("bn_momentum");
  s.bn_epsilon = j.at("bn_epsilon");
  return s;
}

BackboneSpec backbone_spec_from_json(const json& j) {
  BackboneSpec s;
  s.kind = parse_trunk_kind(j.at("kind").get<std::string>());
  s.bundle_dir = j.at("bundle_dir").get<std::string>();
  s.freeze_boundary = j.at("freeze_boundary");
  s.allow_random_init = j.at("allow_random_init");
  s.init_seed = j.at("init_seed");
  return s;
}

PreprocessSpec preprocess_spec_from_json(const json& j) {
  PreprocessSpec s;
  s.target_size = j.at("target_size");
  s.interpolation = parse_interpolation(j.at("interpolation").get<std::string>());
  return s;
}

// --- ClassificationHead ------------------------------------------------------

ClassificationHead::ClassificationHead(const HeadSpec& spec, Rng& init_rng)
    : spec_(spec), bn_("head.bn", spec.input_features, spec.bn_momentum, spec.bn_epsilon) {
  spec_.validate();
  Eigen::Index in = spec.input_features;
  for (std::size_t i = 0; i < spec.dense_units.size(); ++i) {
    hidden_.emplace_back("head.dense_" + std::to_string(i), in, spec.dense_units[i]);
    hidden_.back().glorot_uniform_init(init_rng);
    in = spec.dense_units[i];
  }
  output_ = nn::Dense("head.output", in, spec.num_classes);
  output_.glorot_uniform_init(init_rng);
}

Matrix ClassificationHead::forward_train(const Matrix& pooled, Rng& dropout_rng, Cache& cache) {
  cache.input = pooled;
  Matrix h = bn_.forward_train(pooled, cache.bn);
  cache.dense_inputs.clear();
  cache.pre_activations.clear();
  cache.dropout_masks.clear();
  for (auto& dense : hidden_) {
    cache.dense_inputs.push_back(h);
    Matrix z = dense.forward(h);
    Matrix mask = nn::dropout_mask(z.rows(), z.cols(), spec_.dropout_rate, dropout_rng);
    h = nn::relu(z).cwiseProduct(mask);
    cache.pre_activations.push_back(std::move(z));
    cache.dropout_masks.push_back(std::move(mask));
  }
  cache.dense_inputs.push_back(h);
  return output_.forward(h);
}

Matrix ClassificationHead::forward_inference(const Matrix& pooled) const {
  Matrix h = bn_.forward_inference(pooled);
  for (const auto& dense : hidden_) {
    h = nn::relu(dense.forward(h));
  }
  return output_.forward(h);
}

Matrix ClassificationHead::backward(const Cache& cache, const Matrix& dlogits) {
  Matrix g = output_.backward(cache.dense_inputs.back(), dlogits, true);
  for (std::size_t k = hidden_.size(); k-- > 0;) {
    g = g.cwiseProduct(cache.dropout_masks[k]);
    g = nn::relu_backward(cache.pre_activations[k], g);
    g = hidden_[k].backward(cache.dense_inputs[k], g, true);
  }
  return bn_.backward(cache.bn, g);
}

std::vector<nn::Parameter*> ClassificationHead::parameters() {
  std::vector<nn::Parameter*> params = bn_.parameters();
  for (auto& dense : hidden_) {
    for (auto* p : dense.parameters()) {
      params.push_back(p);
    }
  }
  for (auto* p : output_.parameters()) {
    params.push_back(p);
  }
  return params;
}

// --- ClassifierModel ---------------------------------------------------------

ClassifierModel::ClassifierModel(BackboneSpec backbone, HeadSpec head, PreprocessSpec preprocess,
                                 bool load_tail_weights)
    : head_spec_(std::move(head)), preprocess_(preprocess), backbone_(std::move(backbone), load_tail_weights) {
  head_spec_.validate();
  if (head_spec_.input_features != kBackboneFeatures) {
    throw UsageError("head input features must match the backbone's 1280 channels");
  }
  Rng init_rng(derive_seed(backbone_.spec().init_seed, "head"));
  head_ = std::make_unique<ClassificationHead>(head_spec_, init_rng);
}

FeatureMap ClassifierModel::stage(const ImageTensor& input) {
  FeatureMap map = backbone_.frozen_prefix(input);
  if (backbone_.spec().freeze_boundary == 0) {
    return {1, 1, nn::global_average_pool(map.values)};
  }
  return map;
}

FeatureMap ClassifierModel::stage(const cv::Mat& image) { return stage(preprocess(image, preprocess_)); }

Matrix ClassifierModel::pooled(std::span<const FeatureMap* const> batch) const {
  Matrix out(static_cast<Eigen::Index>(batch.size()), head_spec_.input_features);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const FeatureMap map = backbone_.trainable_forward(*batch[i], nullptr);
    out.row(static_cast<Eigen::Index>(i)) = nn::global_average_pool(map.values);
  }
  return out;
}

Matrix ClassifierModel::logits_staged(std::span<const FeatureMap* const> batch) const {
  if (batch.empty()) {
    return Matrix(0, head_spec_.num_classes);
  }
  return head_->forward_inference(pooled(batch));
}

Matrix ClassifierModel::predict_staged(std::span<const FeatureMap* const> batch) const {
  return nn::softmax(logits_staged(batch));
}

Matrix ClassifierModel::predict(std::span<const ImageTensor> batch) {
  for (const auto& t : batch) {
    if (t.height != preprocess_.target_size || t.width != preprocess_.target_size ||
        t.data.size() != static_cast<std::size_t>(t.height) * t.width * 3) {
      throw UsageError("predict: input tensor must be " + std::to_string(preprocess_.target_size) + "x" +
                       std::to_string(preprocess_.target_size) + "x3");
    }
  }
  std::vector<FeatureMap> staged;
  staged.reserve(batch.size());
  for (const auto& t : batch) {
    staged.push_back(stage(t));
  }
  std::vector<const FeatureMap*> ptrs;
  for (const auto& s : staged) {
    ptrs.push_back(&s);
  }
  return predict_staged(ptrs);
}

ClassifierModel::StepResult ClassifierModel::forward_backward(std::span<const FeatureMap* const> batch,
                                                              const std::vector<int>& labels,
                                                              Rng& dropout_rng) {
  if (batch.empty() || batch.size() != labels.size()) {
    throw UsageError("forward_backward: batch and labels must be non-empty and equal length");
  }
  for (auto* p : parameters()) {
    p->zero_grad();
  }
  const auto n = static_cast<Eigen::Index>(batch.size());
  const bool tail_trains = backbone_.spec().freeze_boundary > 0;

  std::vector<std::vector<TailStage::Cache>> caches(batch.size());
  std::vector<std::pair<int, int>> grids(batch.size());
  Matrix pooled_batch(n, head_spec_.input_features);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const FeatureMap map = backbone_.trainable_forward(*batch[i], tail_trains ? &caches[i] : nullptr);
    grids[i] = {map.height, map.width};
    pooled_batch.row(static_cast<Eigen::Index>(i)) = nn::global_average_pool(map.values);
  }

  ClassificationHead::Cache head_cache;
  const Matrix logits = head_->forward_train(pooled_batch, dropout_rng, head_cache);
  const Matrix probabilities = nn::softmax(logits);

  StepResult result;
  result.loss = nn::cross_entropy(logits, labels);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index predicted = 0;
    probabilities.row(i).maxCoeff(&predicted);
    if (predicted == labels[static_cast<std::size_t>(i)]) {
      ++result.correct;
    }
  }
  if (!std::isfinite(result.loss)) {
    return result;
  }

  const Matrix dpooled = head_->backward(head_cache, nn::cross_entropy_grad(probabilities, labels));
  if (tail_trains) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto [h, w] = grids[i];
      const Eigen::Index positions = static_cast<Eigen::Index>(h) * w;
      const Matrix dmap =
          dpooled.row(static_cast<Eigen::Index>(i)).replicate(positions, 1) / static_cast<double>(positions);
      backbone_.trainable_backward(caches[i], dmap, h, w);
    }
  }
  return result;
}

std::vector<nn::Parameter*> ClassifierModel::parameters() {
  std::vector<nn::Parameter*> params = backbone_.parameters();
  for (auto* p : head_->parameters()) {
    params.push_back(p);
  }
  return params;
}

std::vector<nn::Parameter*> ClassifierModel::trainable_parameters() {
  std::vector<nn::Parameter*> params;
  for (auto* p : parameters()) {
    if (p->trainable) {
      params.push_back(p);
    }
  }
  return params;
}

std::size_t ClassifierModel::head_trainable_parameter_count() {
  std::size_t n = 0;
  for (auto* p : head_->parameters()) {
    if (p->trainable) {
      n += static_cast<std::size_t>(p->size());
    }
  }
  return n;
}

std::size_t ClassifierModel::head_parameter_count() {
  std::size_t n = 0;
  for (auto* p : head_->parameters()) {
    n += static_cast<std::size_t>(p->size());
  }
  return n;
}

json ClassifierModel::describe() const {
  json classes = json::array();
  for (Label l : kAllLabels) {
    classes.push_back(std::string(to_string(l)));
  }
  return {{"head", to_json(head_spec_)},
          {"backbone", to_json(backbone_.spec())},
          {"preprocess", to_json(preprocess_)},
          {"classes", classes}};
}

void ClassifierModel::save(const std::filesystem::path& path, const json& extra_meta) {
  TensorArchive archive;
  archive.meta = describe();
  if (!extra_meta.is_null()) {
    archive.meta["extra"] = extra_meta;
  }
  for (auto* p : parameters()) {
    archive.tensors[p->name] = Tensor{p->shape, std::vector<double>(p->value.data(), p->value.data() + p->size())};
  }
  write_archive(path, archive, StoragePrecision::f64);
}

void ClassifierModel::load_parameters(const TensorArchive& archive) {
  for (auto* p : parameters()) {
    const Tensor& t = archive.at(p->name);
    if (t.shape != p->shape) {
      throw DataError("checkpoint tensor '" + p->name + "' has an unexpected shape");
    }
    p->value = Eigen::Map<const Eigen::VectorXd>(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
  }
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
  const TensorArchive archive = read_archive(path);
  auto build = [&]() {
    try {
      return ClassifierModel(backbone_spec_from_json(archive.meta.at("backbone")),
                             head_spec_from_json(archive.meta.at("head")),
                             preprocess_spec_from_json(archive.meta.at("preprocess")), false);
    } catch (const json::exception& e) {
      throw DataError("checkpoint " + path.string() + " has malformed metadata: " + e.what());
    }
  };
  ClassifierModel model = build();
  model.load_parameters(archive);
  return model;
}

}  // namespace leafbg
