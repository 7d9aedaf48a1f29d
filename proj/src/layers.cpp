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

#include "leafbg/layers.hpp"

#include <cmath>

#include "leafbg/error.hpp"

namespace leafbg::nn {

Parameter::Parameter(std::string name_, std::vector<std::int64_t> shape_, bool trainable_)
    : name(std::move(name_)), shape(std::move(shape_)), trainable(trainable_) {
  Eigen::Index n = 1;
  for (auto d : shape) {
    n *= d;
  }
  value = Vector::Zero(n);
  grad = Vector::Zero(n);
}

// --- FrozenStatsBatchNorm ----------------------------------------------------

FrozenStatsBatchNorm::FrozenStatsBatchNorm(const std::string& prefix, Eigen::Index channels,
                                           double epsilon)
    : gamma_(prefix + ".gamma", {channels}, true),
      beta_(prefix + ".beta", {channels}, true),
      mean_(prefix + ".mean", {channels}, false),
      var_(prefix + ".var", {channels}, false),
      epsilon_(epsilon) {
  gamma_.value.setOnes();
  var_.value.setOnes();
}

RowVector FrozenStatsBatchNorm::inv_std() const {
  return (var_.value.array() + epsilon_).rsqrt().matrix().transpose();
}

Matrix FrozenStatsBatchNorm::forward(const Matrix& x) const {
  const RowVector scale = gamma_.value.transpose().cwiseProduct(inv_std());
  const RowVector shift = beta_.value.transpose() - mean_.value.transpose().cwiseProduct(scale);
  return (x.array().rowwise() * scale.array()).rowwise() + shift.array();
}

Matrix FrozenStatsBatchNorm::backward(const Matrix& x, const Matrix& dy) {
  const RowVector inv = inv_std();
  if (gamma_.trainable) {
    const Matrix normalised = (x.rowwise() - mean_.value.transpose()).array().rowwise() * inv.array();
    gamma_.grad += (dy.cwiseProduct(normalised)).colwise().sum().transpose();
    beta_.grad += dy.colwise().sum().transpose();
  }
  const RowVector scale = gamma_.value.transpose().cwiseProduct(inv);
  return dy.array().rowwise() * scale.array();
}

void FrozenStatsBatchNorm::set_trainable(bool trainable) {
  gamma_.trainable = trainable;
  beta_.trainable = trainable;
}

std::vector<Parameter*> FrozenStatsBatchNorm::parameters() { return {&gamma_, &beta_, &mean_, &var_}; }

// --- PointwiseConv -----------------------------------------------------------

PointwiseConv::PointwiseConv(const std::string& name, Eigen::Index in, Eigen::Index out)
    : weight_(name, {out, in}, true), in_(in), out_(out) {}

Matrix PointwiseConv::forward(const Matrix& x) const {
  return x * weight_.as_matrix(out_, in_).transpose();
}

Matrix PointwiseConv::backward(const Matrix& x, const Matrix& dy, bool need_input_grad) {
  if (weight_.trainable) {
    weight_.grad_matrix(out_, in_).noalias() += dy.transpose() * x;
  }
  if (!need_input_grad) {
    return {};
  }
  return dy * weight_.as_matrix(out_, in_);
}

void PointwiseConv::he_init(Rng& rng) {
  // Kaiming normal, fan_out mode.
  const double std_dev = std::sqrt(2.0 / static_cast<double>(out_));
  for (Eigen::Index i = 0; i < weight_.size(); ++i) {
    weight_.value[i] = std_dev * rng.normal();
  }
}

// --- DepthwiseConv3x3 --------------------------------------------------------

DepthwiseConv3x3::DepthwiseConv3x3(const std::string& name, Eigen::Index channels)
    : weight_(name, {channels, 9}, true), channels_(channels) {}

Matrix DepthwiseConv3x3::forward(const Matrix& x, int height, int width) const {
  const auto w = weight_.as_matrix(channels_, 9);
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (int oy = 0; oy < height; ++oy) {
    for (int ox = 0; ox < width; ++ox) {
      const Eigen::Index p = static_cast<Eigen::Index>(oy) * width + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy + ky - 1;
        if (iy < 0 || iy >= height) {
          continue;
        }
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox + kx - 1;
          if (ix < 0 || ix >= width) {
            continue;
          }
          const Eigen::Index q = static_cast<Eigen::Index>(iy) * width + ix;
          y.row(p).array() += x.row(q).array() * w.col(ky * 3 + kx).transpose().array();
        }
      }
    }
  }
  return y;
}

Matrix DepthwiseConv3x3::backward(const Matrix& x, const Matrix& dy, int height, int width,
                                  bool need_input_grad) {
  const auto w = weight_.as_matrix(channels_, 9);
  auto dw = weight_.grad_matrix(channels_, 9);
  Matrix dx;
  if (need_input_grad) {
    dx = Matrix::Zero(x.rows(), x.cols());
  }
  for (int oy = 0; oy < height; ++oy) {
    for (int ox = 0; ox < width; ++ox) {
      const Eigen::Index p = static_cast<Eigen::Index>(oy) * width + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy + ky - 1;
        if (iy < 0 || iy >= height) {
          continue;
        }
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox + kx - 1;
          if (ix < 0 || ix >= width) {
            continue;
          }
          const Eigen::Index q = static_cast<Eigen::Index>(iy) * width + ix;
          const int tap = ky * 3 + kx;
          if (weight_.trainable) {
            dw.col(tap).array() += (x.row(q).array() * dy.row(p).array()).transpose();
          }
          if (need_input_grad) {
            dx.row(q).array() += dy.row(p).array() * w.col(tap).transpose().array();
          }
        }
      }
    }
  }
  return dx;
}

void DepthwiseConv3x3::he_init(Rng& rng) {
  // fan_out for a depthwise kernel is kernel area (one output per group).
  const double std_dev = std::sqrt(2.0 / 9.0);
  for (Eigen::Index i = 0; i < weight_.size(); ++i) {
    weight_.value[i] = std_dev * rng.normal();
  }
}

Matrix relu6(const Matrix& x) { return x.cwiseMax(0.0).cwiseMin(6.0); }

Matrix relu6_backward(const Matrix& pre, const Matrix& dy) {
  return (pre.array() > 0.0 && pre.array() < 6.0).select(dy, 0.0);
}

// --- head --------------------------------------------------------------------

RowVector global_average_pool(const Matrix& feature_map) {
  return feature_map.colwise().mean();
}

BatchNorm1d::BatchNorm1d(const std::string& prefix, Eigen::Index features, double momentum,
                         double epsilon)
    : gamma_(prefix + ".gamma", {features}, true),
      beta_(prefix + ".beta", {features}, true),
      moving_mean_(prefix + ".moving_mean", {features}, false),
      moving_var_(prefix + ".moving_variance", {features}, false),
      momentum_(momentum),
      epsilon_(epsilon) {
  gamma_.value.setOnes();
  moving_var_.value.setOnes();
}

Matrix BatchNorm1d::forward_train(const Matrix& x, Cache& cache) {
  const RowVector mean = x.colwise().mean();
  const Matrix centred = x.rowwise() - mean;
  const RowVector var = centred.array().square().colwise().mean();
  cache.inv_std = (var.array() + epsilon_).rsqrt();
  cache.normalised = centred.array().rowwise() * cache.inv_std.array();

  moving_mean_.value = momentum_ * moving_mean_.value + (1.0 - momentum_) * mean.transpose();
  moving_var_.value = momentum_ * moving_var_.value + (1.0 - momentum_) * var.transpose();

  return (cache.normalised.array().rowwise() * gamma_.value.transpose().array()).rowwise() +
         beta_.value.transpose().array();
}

Matrix BatchNorm1d::forward_inference(const Matrix& x) const {
  const RowVector inv = (moving_var_.value.array() + epsilon_).rsqrt().matrix().transpose();
  const Matrix normalised = (x.rowwise() - moving_mean_.value.transpose()).array().rowwise() * inv.array();
  return (normalised.array().rowwise() * gamma_.value.transpose().array()).rowwise() +
         beta_.value.transpose().array();
}

Matrix BatchNorm1d::backward(const Cache& cache, const Matrix& dy) {
  const double n = static_cast<double>(dy.rows());
  gamma_.grad += dy.cwiseProduct(cache.normalised).colwise().sum().transpose();
  beta_.grad += dy.colwise().sum().transpose();
  const Matrix dnorm = dy.array().rowwise() * gamma_.value.transpose().array();
  const RowVector sum_dnorm = dnorm.colwise().sum();
  const RowVector sum_dnorm_norm = dnorm.cwiseProduct(cache.normalised).colwise().sum();
  Matrix dx = (dnorm * n).rowwise() - sum_dnorm;
  dx.array() -= cache.normalised.array().rowwise() * sum_dnorm_norm.array();
  return dx.array().rowwise() * (cache.inv_std.array() / n);
}

std::vector<Parameter*> BatchNorm1d::parameters() {
  return {&gamma_, &beta_, &moving_mean_, &moving_var_};
}

Dense::Dense(const std::string& prefix, Eigen::Index in, Eigen::Index out)
    : kernel_(prefix + ".kernel", {in, out}, true), bias_(prefix + ".bias", {out}, true), in_(in), out_(out) {}

Matrix Dense::forward(const Matrix& x) const {
  Matrix y = x * kernel_.as_matrix(in_, out_);
  y.rowwise() += bias_.value.transpose();
  return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy, bool need_input_grad) {
  kernel_.grad_matrix(in_, out_).noalias() += x.transpose() * dy;
  bias_.grad += dy.colwise().sum().transpose();
  if (!need_input_grad) {
    return {};
  }
  return dy * kernel_.as_matrix(in_, out_).transpose();
}

void Dense::glorot_uniform_init(Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_ + out_));
  for (Eigen::Index i = 0; i < kernel_.size(); ++i) {
    kernel_.value[i] = rng.uniform(-limit, limit);
  }
  bias_.value.setZero();
}

std::vector<Parameter*> Dense::parameters() { return {&kernel_, &bias_}; }

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
  }
  return mask;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& pre, const Matrix& dy) {
  return (pre.array() > 0.0).select(dy, 0.0);
}

Matrix softmax(const Matrix& logits) {
  Matrix shifted = logits.colwise() - logits.rowwise().maxCoeff();
  Matrix e = shifted.array().exp();
  return e.array().colwise() / e.rowwise().sum().array();
}

double cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows() || labels.empty()) {
    throw UsageError("cross_entropy: label count does not match batch size");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

Matrix cross_entropy_grad(const Matrix& probabilities, const std::vector<int>& labels) {
  Matrix grad = probabilities;
  for (Eigen::Index i = 0; i < grad.rows(); ++i) {
    grad(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  return grad / static_cast<double>(grad.rows());
}

}  // namespace leafbg::nn
