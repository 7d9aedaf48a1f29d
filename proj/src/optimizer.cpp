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

#include "leafbg/optimizer.hpp"

#include <cmath>

#include "leafbg/error.hpp"

namespace leafbg {

std::string_view to_string(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::adam ? "adam" : "rmsprop";
}

OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "adam") {
    return OptimizerKind::adam;
  }
  if (text == "rmsprop") {
    return OptimizerKind::rmsprop;
  }
  throw UsageError("unknown optimizer '" + std::string(text) + "' (expected adam or rmsprop)");
}

void OptimizerConfig::validate() const {
  auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!(learning_rate > 0.0)) {
    throw UsageError("learning_rate must be positive");
  }
  if (!(epsilon > 0.0)) {
    throw UsageError("epsilon must be positive");
  }
  if (kind == OptimizerKind::adam && (!in_unit(beta_1) || !in_unit(beta_2))) {
    throw UsageError("adam beta_1 and beta_2 must lie in (0, 1)");
  }
  if (kind == OptimizerKind::rmsprop && (!in_unit(rho) || momentum < 0.0 || momentum >= 1.0)) {
    throw UsageError("rmsprop rho must lie in (0, 1) and momentum in [0, 1)");
  }
}

OptimizerConfig default_optimizer(OptimizerKind kind) {
  OptimizerConfig c;
  c.kind = kind;
  c.learning_rate = 2e-5;
  if (kind == OptimizerKind::adam) {
    c.beta_1 = 0.9;
    c.beta_2 = 0.99;
    c.epsilon = 1e-8;
    c.amsgrad = false;
  } else {
    c.rho = 0.98;
    c.epsilon = 1e-9;
    c.momentum = 0.2;
  }
  return c;
}

nlohmann::json to_json(const OptimizerConfig& c) {
  if (c.kind == OptimizerKind::adam) {
    return {{"kind", "adam"},          {"learning_rate", c.learning_rate}, {"beta_1", c.beta_1},
            {"beta_2", c.beta_2},      {"epsilon", c.epsilon},             {"amsgrad", c.amsgrad}};
  }
  return {{"kind", "rmsprop"}, {"learning_rate", c.learning_rate}, {"rho", c.rho},
          {"epsilon", c.epsilon}, {"momentum", c.momentum}};
}

namespace {

Eigen::VectorXd& slot(std::map<std::string, Eigen::VectorXd>& table, const nn::Parameter& p) {
  auto [it, inserted] = table.try_emplace(p.name);
  if (inserted) {
    it->second = Eigen::VectorXd::Zero(p.size());
  }
  return it->second;
}

void save_slots(TensorArchive& archive, const std::string& prefix,
                const std::map<std::string, Eigen::VectorXd>& table) {
  for (const auto& [name, values] : table) {
    archive.tensors[prefix + name] =
        Tensor{{values.size()}, std::vector<double>(values.data(), values.data() + values.size())};
  }
}

void load_slots(const TensorArchive& archive, const std::string& prefix,
                std::map<std::string, Eigen::VectorXd>& table) {
  table.clear();
  for (const auto& [name, tensor] : archive.tensors) {
    if (name.rfind(prefix, 0) == 0) {
      table[name.substr(prefix.size())] = Eigen::Map<const Eigen::VectorXd>(
          tensor.values.data(), static_cast<Eigen::Index>(tensor.values.size()));
    }
  }
}

}  // namespace

Adam::Adam(OptimizerConfig config) : Optimizer(config) {
  if (config_.kind != OptimizerKind::adam) {
    throw UsageError("Adam constructed with a non-adam config");
  }
}

void Adam::step(std::span<nn::Parameter* const> params) {
  ++iterations_;
  const double t = static_cast<double>(iterations_);
  const double b1 = config_.beta_1;
  const double b2 = config_.beta_2;
  const double alpha = config_.learning_rate * std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
  for (nn::Parameter* p : params) {
    if (!p->trainable) {
      continue;
    }
    auto& m = slot(m_, *p);
    auto& v = slot(v_, *p);
    m = b1 * m + (1.0 - b1) * p->grad;
    v = b2 * v + (1.0 - b2) * p->grad.cwiseAbs2();
    if (config_.amsgrad) {
      auto& v_hat = slot(v_max_, *p);
      v_hat = v_hat.cwiseMax(v);
      p->value.array() -= alpha * m.array() / (v_hat.array().sqrt() + config_.epsilon);
    } else {
      p->value.array() -= alpha * m.array() / (v.array().sqrt() + config_.epsilon);
    }
  }
}

void Adam::save_state(TensorArchive& archive) const {
  archive.meta["optimizer"] = to_json(config_);
  archive.meta["optimizer_iterations"] = iterations_;
  save_slots(archive, "adam.m.", m_);
  save_slots(archive, "adam.v.", v_);
  save_slots(archive, "adam.vmax.", v_max_);
}

void Adam::load_state(const TensorArchive& archive) {
  iterations_ = archive.meta.value("optimizer_iterations", std::int64_t{0});
  load_slots(archive, "adam.m.", m_);
  load_slots(archive, "adam.v.", v_);
  load_slots(archive, "adam.vmax.", v_max_);
}

RmsProp::RmsProp(OptimizerConfig config) : Optimizer(config) {
  if (config_.kind != OptimizerKind::rmsprop) {
    throw UsageError("RmsProp constructed with a non-rmsprop config");
  }
}

void RmsProp::step(std::span<nn::Parameter* const> params) {
  ++iterations_;
  for (nn::Parameter* p : params) {
    if (!p->trainable) {
      continue;
    }
    auto& v = slot(velocity_, *p);
    v = config_.rho * v + (1.0 - config_.rho) * p->grad.cwiseAbs2();
    const Eigen::VectorXd increment =
        (config_.learning_rate * p->grad.array() / (v.array() + config_.epsilon).sqrt()).matrix();
    if (config_.momentum > 0.0) {
      auto& mom = slot(momentum_, *p);
      mom = config_.momentum * mom + increment;
      p->value -= mom;
    } else {
      p->value -= increment;
    }
  }
}

void RmsProp::save_state(TensorArchive& archive) const {
  archive.meta["optimizer"] = to_json(config_);
  archive.meta["optimizer_iterations"] = iterations_;
  save_slots(archive, "rmsprop.velocity.", velocity_);
  save_slots(archive, "rmsprop.momentum.", momentum_);
}

void RmsProp::load_state(const TensorArchive& archive) {
  iterations_ = archive.meta.value("optimizer_iterations", std::int64_t{0});
  load_slots(archive, "rmsprop.velocity.", velocity_);
  load_slots(archive, "rmsprop.momentum.", momentum_);
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config) {
  if (config.kind == OptimizerKind::adam) {
    return std::make_unique<Adam>(config);
  }
  return std::make_unique<RmsProp>(config);
}

}  // namespace leafbg
