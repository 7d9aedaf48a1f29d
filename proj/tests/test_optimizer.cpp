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

#include <cmath>

#include <gtest/gtest.h>

#include "leafbg/error.hpp"
#include "leafbg/optimizer.hpp"
#include "test_util.hpp"

namespace leafbg {
namespace {

nn::Parameter scalar(double w) {
  nn::Parameter p("w", {1}, true);
  p.value[0] = w;
  return p;
}

TEST(Defaults, Adam) {
  const auto c = default_optimizer(OptimizerKind::adam);
  EXPECT_EQ(c.kind, OptimizerKind::adam);
  EXPECT_EQ(c.learning_rate, 2e-5);
  EXPECT_EQ(c.beta_1, 0.9);
  EXPECT_EQ(c.beta_2, 0.99);
  EXPECT_EQ(c.epsilon, 1e-8);
  EXPECT_FALSE(c.amsgrad);
}

TEST(Defaults, RmsProp) {
  const auto c = default_optimizer(OptimizerKind::rmsprop);
  EXPECT_EQ(c.kind, OptimizerKind::rmsprop);
  EXPECT_EQ(c.learning_rate, 2e-5);
  EXPECT_EQ(c.rho, 0.98);
  EXPECT_EQ(c.epsilon, 1e-9);
  EXPECT_EQ(c.momentum, 0.2);
}

TEST(AdamStep, HandSteppedScalarQuadratic) {
  // f(w) = w^2 at w0 = 1: g = 2.
  //   m1 = 0.1 * 2 = 0.2, v1 = 0.01 * 4 = 0.04
  //   alpha1 = 2e-5 * sqrt(1 - 0.99) / (1 - 0.9) = 2e-5
  //   w1 = 1 - 2e-5 * 0.2 / (0.2 + 1e-8)
  const double expected = 1.0 - 2e-5 * 0.2 / (0.2 + 1e-8);
  nn::Parameter w = scalar(1.0);
  w.grad = Eigen::VectorXd::Constant(1, 2.0 * w.value[0]);
  Adam adam(default_optimizer(OptimizerKind::adam));
  nn::Parameter* ps[] = {&w};
  adam.step(ps);
  EXPECT_NEAR(w.value[0], expected, 1e-10);
  EXPECT_EQ(adam.iterations(), 1);
}

TEST(RmsPropStep, HandSteppedScalarQuadratic) {
  //   v1 = 0.02 * 4 = 0.08
  //   inc = 2e-5 * 2 / sqrt(0.08 + 1e-9)
  //   mom1 = 0.2 * 0 + inc; w1 = 1 - mom1
  const double expected = 1.0 - 2e-5 * 2.0 / std::sqrt(0.08 + 1e-9);
  nn::Parameter w = scalar(1.0);
  w.grad = Eigen::VectorXd::Constant(1, 2.0);
  RmsProp rms(default_optimizer(OptimizerKind::rmsprop));
  nn::Parameter* ps[] = {&w};
  rms.step(ps);
  EXPECT_NEAR(w.value[0], expected, 1e-10);
}

/// Scalar reference recurrences, stepped independently of the library.
struct ScalarAdam {
  double lr, b1, b2, eps;
  bool amsgrad;
  double m = 0, v = 0, vmax = 0;
  int t = 0;
  double step(double w, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    vmax = std::max(vmax, v);
    const double a = lr * std::sqrt(1 - std::pow(b2, t)) / (1 - std::pow(b1, t));
    return w - a * m / (std::sqrt(amsgrad ? vmax : v) + eps);
  }
};

struct ScalarRms {
  double lr, rho, eps, momentum;
  double v = 0, mom = 0;
  double step(double w, double g) {
    v = rho * v + (1 - rho) * g * g;
    const double inc = lr * g / std::sqrt(v + eps);
    if (momentum > 0) {
      mom = momentum * mom + inc;
      return w - mom;
    }
    return w - inc;
  }
};

TEST(AdamStep, ManyStepsMatchScalarOracle) {
  for (bool amsgrad : {false, true}) {
    OptimizerConfig c = default_optimizer(OptimizerKind::adam);
    c.learning_rate = 0.05;
    c.amsgrad = amsgrad;
    Adam adam(c);
    ScalarAdam ref{c.learning_rate, c.beta_1, c.beta_2, c.epsilon, amsgrad};
    nn::Parameter w = scalar(1.0);
    double w_ref = 1.0;
    nn::Parameter* ps[] = {&w};
    for (int i = 0; i < 60; ++i) {
      // non-convex gradient so v is not monotone and amsgrad matters
      const double g = 2.0 * w.value[0] + 3.0 * std::sin(5.0 * i);
      w.grad = Eigen::VectorXd::Constant(1, g);
      adam.step(ps);
      w_ref = ref.step(w_ref, g);
      ASSERT_NEAR(w.value[0], w_ref, 1e-12) << "step " << i;
    }
  }
}

TEST(RmsPropStep, ManyStepsMatchScalarOracle) {
  for (double momentum : {0.0, 0.2, 0.9}) {
    OptimizerConfig c = default_optimizer(OptimizerKind::rmsprop);
    c.learning_rate = 0.01;
    c.momentum = momentum;
    RmsProp rms(c);
    ScalarRms ref{c.learning_rate, c.rho, c.epsilon, momentum};
    nn::Parameter w = scalar(-2.0);
    double w_ref = -2.0;
    nn::Parameter* ps[] = {&w};
    for (int i = 0; i < 60; ++i) {
      const double g = 2.0 * w.value[0];
      w.grad = Eigen::VectorXd::Constant(1, g);
      rms.step(ps);
      w_ref = ref.step(w_ref, g);
      ASSERT_NEAR(w.value[0], w_ref, 1e-12) << "step " << i;
    }
  }
}

TEST(OptimizerTest, SkipsFrozenParameters) {
  for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::rmsprop}) {
    auto opt = make_optimizer(default_optimizer(kind));
    nn::Parameter frozen("frozen", {3}, false);
    frozen.value << 1, 2, 3;
    frozen.grad = Eigen::VectorXd::Ones(3);
    nn::Parameter* ps[] = {&frozen};
    opt->step(ps);
    EXPECT_EQ(frozen.value, (Eigen::VectorXd(3) << 1, 2, 3).finished());
  }
}

TEST(OptimizerTest, StateRoundTripContinuesIdentically) {
  for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::rmsprop}) {
    OptimizerConfig c = default_optimizer(kind);
    c.learning_rate = 0.01;
    Rng rng(3);
    nn::Parameter a("a", {4}, true);
    a.value = Eigen::VectorXd::Random(4);
    nn::Parameter b = a;
    auto first = make_optimizer(c);
    nn::Parameter* pa[] = {&a};
    for (int i = 0; i < 5; ++i) {
      a.grad = a.value * 2.0;
      first->step(pa);
    }
    TensorArchive archive;
    first->save_state(archive);
    auto second = make_optimizer(c);
    second->load_state(archive);
    b = a;
    nn::Parameter* pb[] = {&b};
    for (int i = 0; i < 5; ++i) {
      a.grad = a.value * 2.0;
      b.grad = b.value * 2.0;
      first->step(pa);
      second->step(pb);
      ASSERT_EQ(a.value, b.value);
    }
  }
}

TEST(OptimizerConfigTest, Validation) {
  auto bad = [](auto mutate, OptimizerKind kind) {
    OptimizerConfig c = default_optimizer(kind);
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](auto& c) { c.learning_rate = 0; }, OptimizerKind::adam).validate(), UsageError);
  EXPECT_THROW(bad([](auto& c) { c.epsilon = 0; }, OptimizerKind::adam).validate(), UsageError);
  EXPECT_THROW(bad([](auto& c) { c.beta_1 = 1.0; }, OptimizerKind::adam).validate(), UsageError);
  EXPECT_THROW(bad([](auto& c) { c.beta_2 = 0.0; }, OptimizerKind::adam).validate(), UsageError);
  EXPECT_THROW(bad([](auto& c) { c.rho = 1.0; }, OptimizerKind::rmsprop).validate(), UsageError);
  EXPECT_THROW(bad([](auto& c) { c.momentum = -0.1; }, OptimizerKind::rmsprop).validate(), UsageError);
  EXPECT_THROW(Adam(bad([](auto& c) { c.learning_rate = -1; }, OptimizerKind::adam)), UsageError);
  EXPECT_NO_THROW(default_optimizer(OptimizerKind::adam).validate());
  EXPECT_NO_THROW(default_optimizer(OptimizerKind::rmsprop).validate());
}

TEST(OptimizerConfigTest, KindNames) {
  EXPECT_EQ(parse_optimizer_kind("adam"), OptimizerKind::adam);
  EXPECT_EQ(parse_optimizer_kind("rmsprop"), OptimizerKind::rmsprop);
  EXPECT_THROW(parse_optimizer_kind("adagrad"), UsageError);
  EXPECT_EQ(to_json(default_optimizer(OptimizerKind::rmsprop)).at("momentum").get<double>(), 0.2);
}

}  // namespace
}  // namespace leafbg
