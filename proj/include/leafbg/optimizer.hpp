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
#include <map>
#include <memory>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "leafbg/archive.hpp"
#include "leafbg/layers.hpp"

namespace leafbg {

enum class OptimizerKind { adam, rmsprop };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer_kind(std::string_view text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 2e-5;
  // adam
  double beta_1 = 0.9;
  double beta_2 = 0.99;
  bool amsgrad = false;
  // rmsprop
  double rho = 0.98;
  double momentum = 0.2;
  // both
  double epsilon = 1e-8;

  /// Throws UsageError unless lr > 0, epsilon > 0 and beta/rho lie in (0,1).
  void validate() const;
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// Adam: lr=2e-5, beta_1=0.9, beta_2=0.99, epsilon=1e-8, amsgrad=false.
/// RMSProp: lr=2e-5, rho=0.98, epsilon=1e-9, momentum=0.2.
OptimizerConfig default_optimizer(OptimizerKind kind);

nlohmann::json to_json(const OptimizerConfig& config);

/// Applies in-place updates to trainable parameters, keyed by parameter name.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::span<nn::Parameter* const> params) = 0;
  virtual void save_state(TensorArchive& archive) const = 0;
  virtual void load_state(const TensorArchive& archive) = 0;
  const OptimizerConfig& config() const { return config_; }

 protected:
  explicit Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }
  OptimizerConfig config_;
};

/// Keras update rule:
///   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
///   alpha_t = lr * sqrt(1 - b2^t) / (1 - b1^t)
///   w <- w - alpha_t * m / (sqrt(v) + eps)        (v replaced by max(v) under amsgrad)
class Adam final : public Optimizer {
 public:
  explicit Adam(OptimizerConfig config);
  void step(std::span<nn::Parameter* const> params) override;
  void save_state(TensorArchive& archive) const override;
  void load_state(const TensorArchive& archive) override;
  std::int64_t iterations() const { return iterations_; }

 private:
  std::int64_t iterations_ = 0;
  std::map<std::string, Eigen::VectorXd> m_, v_, v_max_;
};

/// Keras update rule:
///   v <- rho v + (1 - rho) g^2
///   inc = lr * g / sqrt(v + eps)
///   mom <- momentum * mom + inc;  w <- w - mom     (w <- w - inc when momentum = 0)
class RmsProp final : public Optimizer {
 public:
  explicit RmsProp(OptimizerConfig config);
  void step(std::span<nn::Parameter* const> params) override;
  void save_state(TensorArchive& archive) const override;
  void load_state(const TensorArchive& archive) override;

 private:
  std::int64_t iterations_ = 0;
  std::map<std::string, Eigen::VectorXd> velocity_, momentum_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config);

}  // namespace leafbg
