// Copyright 2026 The hpv-dmpc Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "hpv/linear_systems.hpp"
#include "hpv/observer.hpp"
#include "test_support.hpp"

namespace hpv {
namespace {

const HpvModel& model() {
  static const HpvModel m = build_default_model(default_params());
  return m;
}

Matrix s(double v) { return Matrix::Constant(1, 1, v); }

// Scalar predictor Riccati fixed point, solved in closed form:
// p = a^2 p r / (c^2 p + r) + q  =>  c^2 p^2 + (r (1 - a^2) - q c^2) p - q r = 0.
double scalar_riccati(double a, double c, double q, double r) {
  const double b = r * (1 - a * a) - q * c * c;
  return (-b + std::sqrt(b * b + 4 * c * c * q * r)) / (2 * c * c);
}

TEST(DesignGains, ScalarOracle) {
  const double a = 0.95, c = 2.0, q = 0.3, r = 0.1;
  const ObserverBank bank = design_gains({s(a)}, {s(1.0)}, {s(c)}, {s(q)}, {s(r)});
  const double p = scalar_riccati(a, c, q, r);
  const LocalObserver& o = bank.local[0];
  EXPECT_NEAR(o.K(0, 0), a * p * c / (c * c * p + r), 1e-10);
  EXPECT_NEAR(o.M(0, 0), p * c / (c * c * p + r), 1e-10);
  EXPECT_NEAR(o.error_radius, std::abs(a - o.K(0, 0) * c), 1e-12);
  EXPECT_LT(o.error_radius, 1.0);
}

TEST(DesignGains, IntegratorIsDetectable) {
  const ObserverBank bank = design_gains({s(1.0)}, {s(1.0)}, {s(1.0)}, {s(1.0)}, {s(1.0)});
  EXPECT_LT(bank.local[0].error_radius, 1.0);
}

TEST(DesignGains, UndetectablePairThrows) {
  Matrix a = Matrix::Identity(2, 2);
  a(1, 1) = 1.1;  // unstable and unseen
  Matrix c(1, 2);
  c << 1.0, 0.0;
  EXPECT_THROW(design_gains({a}, {Matrix::Ones(2, 1)}, {c}, {Matrix::Identity(2, 2)},
                            {s(1.0)}),
               std::domain_error);
}

TEST(DesignGains, ListLengthsMustAgree) {
  EXPECT_THROW(design_gains({s(1.0)}, {}, {s(1.0)}, {s(1.0)}, {s(1.0)}),
               std::invalid_argument);
}

TEST(ModelObserver, StableAndBlockLocal) {
  const ObserverBank bank = design_model_observer(model(), 0.01, 0.03);
  ASSERT_EQ(bank.size(), 8);
  for (int i = 0; i < 8; ++i) {
    const auto& o = bank.local[i];
    const auto& sub = model().subsystems[i];
    EXPECT_LT(o.error_radius, 1.0);
    // Each gain maps only the subsystem's own outputs to its own states.
    EXPECT_EQ(o.K.rows(), sub.reduced_states());
    EXPECT_EQ(o.K.cols(), sub.Cr.rows());
  }
}

TEST(ModelObserver, PerfectEstimateStaysPerfect) {
  ObserverBank bank = design_model_observer(model(), 0.01, 0.03);
  testing::Rng rng(1);
  std::vector<Vector> xr;
  for (const auto& sub : model().subsystems) xr.push_back(rng.vector(sub.reduced_states(), 0.1));
  for (int i = 0; i < 8; ++i) bank.local[i].x_hat = xr[i];
  for (int k = 0; k < 20; ++k) {
    const Vector q = rng.vector(model().num_inputs(), 5.0);
    Vector y(9);
    int off = 0;
    for (int i = 0; i < 8; ++i) {
      const auto& sub = model().subsystems[i];
      y.segment(off, sub.Cr.rows()) = sub.Cr * xr[i];
      off += static_cast<int>(sub.Cr.rows());
    }
    const auto filt = filtered_estimates(bank, y);
    for (int i = 0; i < 8; ++i) EXPECT_LT((filt[i] - xr[i]).norm(), 1e-10);
    observer_step(bank, q, y);
    for (int i = 0; i < 8; ++i) {
      const auto& sub = model().subsystems[i];
      xr[i] = sub.Ar * xr[i] + sub.Br * q;
      EXPECT_LT((bank.local[i].x_hat - xr[i]).norm(), 1e-8 * (1 + xr[i].norm()));
    }
  }
}

TEST(ModelObserver, ErrorDecaysFromAWrongStart) {
  ObserverBank bank = design_model_observer(model(), 0.01, 0.03);
  std::vector<Vector> xr;
  for (const auto& sub : model().subsystems) xr.push_back(Vector::Zero(sub.reduced_states()));
  for (auto& o : bank.local) o.x_hat = Vector::Ones(o.x_hat.size());
  double first = 0.0, last = 0.0;
  const Vector q = Vector::Zero(model().num_inputs());
  for (int k = 0; k < 60; ++k) {
    observer_step(bank, q, Vector::Zero(9));
    double e = 0.0;
    for (int i = 0; i < 8; ++i) e = std::max(e, bank.local[i].x_hat.norm());
    if (k == 0) first = e;
    last = e;
  }
  EXPECT_LT(last, 1e-3 * first);
}

TEST(ModelObserver, SubsystemsDoNotSeeEachOthersOutputs) {
  ObserverBank a = design_model_observer(model(), 0.01, 0.03);
  ObserverBank b = a;
  Vector ya = Vector::Zero(9), yb = Vector::Zero(9);
  yb[8] = 0.5;  // last output belongs to S8
  const Vector q = Vector::Zero(model().num_inputs());
  observer_step(a, q, ya);
  observer_step(b, q, yb);
  for (int i = 0; i < 7; ++i) EXPECT_TRUE(a.local[i].x_hat == b.local[i].x_hat);
  EXPECT_FALSE(a.local[7].x_hat == b.local[7].x_hat);
}

TEST(ModelObserver, DeterministicDesign) {
  const ObserverBank a = design_model_observer(model(), 0.01, 0.03);
  const ObserverBank b = design_model_observer(model(), 0.01, 0.03);
  for (int i = 0; i < 8; ++i) EXPECT_TRUE(a.local[i].K == b.local[i].K);
}

TEST(ObserverStep, DimensionMismatchThrows) {
  ObserverBank bank = design_model_observer(model(), 0.01, 0.03);
  EXPECT_THROW(observer_step(bank, Vector::Zero(3), Vector::Zero(9)),
               std::invalid_argument);
  EXPECT_THROW(observer_step(bank, Vector::Zero(model().num_inputs()), Vector::Zero(10)),
               std::invalid_argument);
}

}  // namespace
}  // namespace hpv
