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
#include <string>
#include <vector>

#include <Eigen/Core>

#include "leafbg/random.hpp"

namespace leafbg::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A named, flat parameter buffer with its logical shape and gradient.
struct Parameter {
  std::string name;
  std::vector<std::int64_t> shape;
  Vector value;
  Vector grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string name, std::vector<std::int64_t> shape, bool trainable);

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }

  /// Views the buffer as a rows x cols row-major matrix.
  Eigen::Map<Matrix> as_matrix(Eigen::Index rows, Eigen::Index cols) {
    return {value.data(), rows, cols};
  }
  Eigen::Map<const Matrix> as_matrix(Eigen::Index rows, Eigen::Index cols) const {
    return {value.data(), rows, cols};
  }
  Eigen::Map<Matrix> grad_matrix(Eigen::Index rows, Eigen::Index cols) {
    return {grad.data(), rows, cols};
  }
};

// ---------------------------------------------------------------------------
// Backbone tail layers. Inputs are per-sample feature maps laid out as
// (positions x channels), positions in row-major (y, x) order.
// ---------------------------------------------------------------------------

/// Batch normalisation with frozen running statistics: y = gamma * (x - mean) / sqrt(var + eps) + beta.
/// gamma and beta follow the owning stage's trainable flag; mean and var never train.
class FrozenStatsBatchNorm {
 public:
  FrozenStatsBatchNorm() = default;
  FrozenStatsBatchNorm(const std::string& prefix, Eigen::Index channels, double epsilon);

  Matrix forward(const Matrix& x) const;
  /// Accumulates dgamma/dbeta when trainable; returns dx.
  Matrix backward(const Matrix& x, const Matrix& dy);

  void set_trainable(bool trainable);
  std::vector<Parameter*> parameters();
  double epsilon() const { return epsilon_; }

 private:
  RowVector inv_std() const;

  Parameter gamma_, beta_, mean_, var_;
  double epsilon_ = 1e-5;
};

/// 1x1 convolution without bias, weight shape (out, in).
class PointwiseConv {
 public:
  PointwiseConv() = default;
  PointwiseConv(const std::string& name, Eigen::Index in, Eigen::Index out);

  Matrix forward(const Matrix& x) const;
  Matrix backward(const Matrix& x, const Matrix& dy, bool need_input_grad);

  void he_init(Rng& rng);
  Parameter& weight() { return weight_; }
  Eigen::Index in_channels() const { return in_; }
  Eigen::Index out_channels() const { return out_; }

 private:
  Parameter weight_;
  Eigen::Index in_ = 0;
  Eigen::Index out_ = 0;
};

/// 3x3 depthwise convolution, stride 1, zero padding 1, weight shape (channels, 9).
class DepthwiseConv3x3 {
 public:
  DepthwiseConv3x3() = default;
  DepthwiseConv3x3(const std::string& name, Eigen::Index channels);

  Matrix forward(const Matrix& x, int height, int width) const;
  Matrix backward(const Matrix& x, const Matrix& dy, int height, int width, bool need_input_grad);

  void he_init(Rng& rng);
  Parameter& weight() { return weight_; }

 private:
  Parameter weight_;
  Eigen::Index channels_ = 0;
};

Matrix relu6(const Matrix& x);
/// Gradient of relu6 given its pre-activation input.
Matrix relu6_backward(const Matrix& pre, const Matrix& dy);

// ---------------------------------------------------------------------------
// Head layers. Inputs are batches laid out as (samples x features).
// ---------------------------------------------------------------------------

/// Arithmetic mean over positions of one feature map: (positions x C) -> (1 x C).
RowVector global_average_pool(const Matrix& feature_map);

/// Batch normalisation with batch statistics in training and moving statistics in inference.
class BatchNorm1d {
 public:
  struct Cache {
    Matrix normalised;
    RowVector inv_std;
  };

  BatchNorm1d() = default;
  BatchNorm1d(const std::string& prefix, Eigen::Index features, double momentum, double epsilon);

  Matrix forward_train(const Matrix& x, Cache& cache);
  Matrix forward_inference(const Matrix& x) const;
  Matrix backward(const Cache& cache, const Matrix& dy);

  std::vector<Parameter*> parameters();

 private:
  Parameter gamma_, beta_, moving_mean_, moving_var_;
  double momentum_ = 0.99;
  double epsilon_ = 1e-3;
};

/// y = x W + b with W of shape (in, out).
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& prefix, Eigen::Index in, Eigen::Index out);

  Matrix forward(const Matrix& x) const;
  Matrix backward(const Matrix& x, const Matrix& dy, bool need_input_grad);

  void glorot_uniform_init(Rng& rng);
  std::vector<Parameter*> parameters();
  Eigen::Index in_features() const { return in_; }
  Eigen::Index out_features() const { return out_; }

 private:
  Parameter kernel_, bias_;
  Eigen::Index in_ = 0;
  Eigen::Index out_ = 0;
};

/// Inverted dropout: kept units are scaled by 1 / (1 - rate) during training.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& pre, const Matrix& dy);

/// Row-wise softmax, max-shifted.
Matrix softmax(const Matrix& logits);

/// Mean categorical cross-entropy, -mean_i log p_i[label_i], from logits.
double cross_entropy(const Matrix& logits, const std::vector<int>& labels);
/// d(mean CE)/d(logits) = (softmax - onehot) / N.
Matrix cross_entropy_grad(const Matrix& probabilities, const std::vector<int>& labels);

}  // namespace leafbg::nn
