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

#include <gtest/gtest.h>

#include "hpv/bnb.hpp"
#include "hpv/mpc_builder.hpp"
#include "test_support.hpp"

namespace hpv {
namespace {

const HpvModel& model() {
  static const HpvModel m = build_default_model(default_params());
  return m;
}

double steady_total() { return linearize_power(model()).offsets.sum(); }

std::vector<Vector> zero_states() {
  std::vector<Vector> x0;
  for (const auto& s : model().subsystems) x0.push_back(Vector::Zero(s.reduced_states()));
  return x0;
}

MpcProblem build(Scheme scheme, int horizon, double ref_factor = 1.0) {
  MpcScenario sc;
  sc.scheme = scheme;
  sc.horizon = horizon;
  return build_qp(model(), sc, std::vector<double>(horizon, ref_factor * steady_total()),
                  zero_states());
}

TEST(Scheme, NamesRoundTrip) {
  for (Scheme s : {Scheme::kGlobalRef, Scheme::kLocRefStat, Scheme::kLocRefDyn,
                   Scheme::kDecentralized}) {
    EXPECT_EQ(scheme_from_string(to_string(s)), s);
  }
  EXPECT_EQ(to_string(Scheme::kLocRefDyn), "loc-ref-dyn");
  try {
    scheme_from_string("dyn");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "unknown scheme 'dyn'");
  }
}

TEST(StaticDivision, EqualPlants) {
  const Matrix d = static_division({80.0}, Vector::Constant(8, 3.0));
  for (int i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(d(0, i), 10.0);
}

TEST(StaticDivision, Proportional) {
  Vector s(2);
  s << 10.0, 30.0;
  const Matrix d = static_division({100.0, 0.0}, s);
  EXPECT_DOUBLE_EQ(d(0, 0), 25.0);
  EXPECT_DOUBLE_EQ(d(0, 1), 75.0);
  EXPECT_DOUBLE_EQ(d(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(d(1, 1), 0.0);
}

TEST(StaticDivision, RowsSumExactly) {
  testing::Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const int m = rng.integer(1, 9);
    Vector s(m);
    for (int i = 0; i < m; ++i) s[i] = rng.uniform(0.0, 40.0);
    const std::vector<double> ref = {rng.uniform(0.0, 200.0), rng.uniform(50, 51)};
    const Matrix d = static_division(ref, s);
    for (int k = 0; k < 2; ++k) {
      double sum = 0.0;
      for (int i = 0; i < m; ++i) sum += d(k, i);
      EXPECT_EQ(sum, ref[k]);
    }
  }
}

TEST(StaticDivision, ZeroTotalThrows) {
  EXPECT_THROW(static_division({1.0}, Vector::Zero(3)), std::invalid_argument);
}

TEST(Exchange, ManagedSetsOfTheValley) {
  const ExchangeStructure ex = build_exchange_structure(model_neighborhoods(model()));
  EXPECT_EQ(ex.managed[0], (std::vector<int>{2, 3}));
  EXPECT_EQ(ex.managed[6], (std::vector<int>{7}));
  EXPECT_TRUE(ex.managed[7].empty());
  EXPECT_EQ(ex.num_links(), 9);
  EXPECT_EQ(ex.link_index(0, 3), 1);
  EXPECT_EQ(ex.link_index(3, 0), -1);
}

TEST(Exchange, PreservationHoldsForAnyDeltas) {
  const ExchangeStructure ex = build_exchange_structure(model_neighborhoods(model()));
  testing::Rng rng(4);
  const std::vector<double> ref = {90.0, 95.0, 100.0};
  const Matrix local = static_division(ref, linearize_power(model()).offsets);
  std::vector<Matrix> delta;
  for (int k = 0; k < 3; ++k) delta.push_back(rng.matrix(8, 8, 50.0));
  EXPECT_LT(reference_preservation_check(ex, local, delta, ref), 1e-12);
}

TEST(BuildQp, EverySchemeIsValid) {
  for (Scheme s : {Scheme::kGlobalRef, Scheme::kLocRefStat, Scheme::kLocRefDyn,
                   Scheme::kDecentralized}) {
    const MpcProblem p = build(s, 10);
    const ValidationReport r = validate_problem(p.qp);
    EXPECT_TRUE(r.ok()) << to_string(s) << ": "
                        << (r.ok() ? "" : r.violations.front());
    EXPECT_EQ(p.pairs.size(), 20u);  // two reversible ducts, ten steps
  }
}

TEST(BuildQp, CommunicationGraphPerScheme) {
  const Neighborhoods valley = model_neighborhoods(model());
  const Neighborhoods global = compute_neighborhoods(build(Scheme::kGlobalRef, 10).qp);
  for (const auto& n : global) EXPECT_EQ(n.size(), 8u);
  EXPECT_EQ(compute_neighborhoods(build(Scheme::kLocRefStat, 10).qp), valley);
  EXPECT_EQ(compute_neighborhoods(build(Scheme::kLocRefDyn, 10).qp), valley);
  const Neighborhoods dec = compute_neighborhoods(build(Scheme::kDecentralized, 10).qp);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(dec[i], std::set<int>{i});
}

TEST(BuildQp, LayoutSizes) {
  const MpcProblem p = build(Scheme::kLocRefDyn, 4);
  const auto& l0 = p.layout[0];
  // S1 owns T1 and the split C1: three inputs, two reduced states, two links.
  EXPECT_EQ(l0.inputs.size(), 3u);
  EXPECT_EQ(l0.order, 2);
  EXPECT_EQ(l0.deltas, 2);
  EXPECT_EQ(p.qp.partition[0], 4 * (3 + 2) + 4 * 2);
  EXPECT_EQ(p.layout[7].deltas, 0);
  EXPECT_EQ(build(Scheme::kLocRefStat, 4).layout[0].deltas, 0);
}

TEST(BuildQp, GlobalRowsRotateOverOwners) {
  const MpcProblem p = build(Scheme::kGlobalRef, 10);
  EXPECT_EQ(p.qp.onenorm_rows(0), 2);  // steps 0 and 8
  EXPECT_EQ(p.qp.onenorm_rows(1), 2);
  EXPECT_EQ(p.qp.onenorm_rows(2), 1);
  EXPECT_EQ(p.qp.num_onenorm(), 10);
}

TEST(BuildQp, SteadyReferenceHasTheZeroSolution) {
  // At the steady state with the steady reference nothing needs to move.
  TwoPhaseOptions o;
  o.solver.stop.eps_eq = o.solver.stop.eps_ineq = 1e-8;
  o.solver.stop.max_iterations = 100000;
  for (Scheme s : {Scheme::kLocRefDyn, Scheme::kGlobalRef}) {
    const MpcProblem p = build(s, 1);
    for (const auto& off : p.qp.onenorm_offset) {
      for (Eigen::Index r = 0; r < off.size(); ++r) EXPECT_NEAR(off[r], 0.0, 1e-12);
    }
    const TwoPhaseResult r = two_phase_solve(p.qp, p.pairs, o);
    EXPECT_LT(r.outcome.x.cwiseAbs().maxCoeff(), 1e-6) << to_string(s);
  }
}

TEST(BuildQp, ExchangedReferencesPreserveTheTotal) {
  const MpcProblem p = build(Scheme::kLocRefDyn, 3, 1.1);
  TwoPhaseOptions o;
  o.solver.stop = StoppingRule::fixed(300);
  const TwoPhaseResult r = two_phase_solve(p.qp, p.pairs, o);
  const auto delta = exchanged_references(p, r.outcome.x);
  const std::vector<double> ref(3, 1.1 * steady_total());
  EXPECT_LT(reference_preservation_check(p.exchange, p.local_refs, delta, ref), 1e-9);
}

TEST(BuildQp, PredictionsFollowTheReducedDynamics) {
  MpcScenario sc;
  sc.horizon = 3;
  std::vector<Vector> x0 = zero_states();
  testing::Rng rng(9);
  for (auto& v : x0) v = rng.vector(static_cast<int>(v.size()), 0.01);
  const MpcProblem p =
      build_qp(model(), sc, std::vector<double>(3, 1.05 * steady_total()), x0);
  TwoPhaseOptions o;
  o.solver.stop.eps_eq = o.solver.stop.eps_ineq = 1e-9;
  o.solver.stop.eps_f = 1e-14;
  o.solver.stop.max_iterations = 200000;
  const Vector x = two_phase_solve(p.qp, p.pairs, o).outcome.x;
  const Vector dq = first_inputs(p, model(), x, sc.weights.flow_scale);
  for (int i = 0; i < 8; ++i) {
    const auto& s = model().subsystems[i];
    const Vector x1 = predicted_states(p, x, i)[0];
    EXPECT_LT((x1 - (s.Ar * x0[i] + s.Br * dq)).cwiseAbs().maxCoeff(), 1e-5)
        << "S" << i + 1;
  }
}

TEST(BuildQp, RejectsInconsistentInput) {
  MpcScenario sc;
  sc.horizon = 3;
  EXPECT_THROW(build_qp(model(), sc, {1.0, 2.0}, zero_states()), std::invalid_argument);
  std::vector<Vector> bad = zero_states();
  bad[0] = Vector::Zero(7);
  EXPECT_THROW(build_qp(model(), sc, {1, 2, 3}, bad), std::invalid_argument);
  sc.weights.output_backoff = 5.0;
  EXPECT_THROW(build_qp(model(), sc, {1, 2, 3}, zero_states()), std::invalid_argument);
  sc.weights.output_backoff = 0.15;
  sc.horizon = 0;
  EXPECT_THROW(build_qp(model(), sc, {1}, zero_states()), std::invalid_argument);
}

TEST(BuildQp, PowerScaleDoesNotChangeTheProblem) {
  MpcScenario a, b;
  a.horizon = b.horizon = 2;
  b.weights.power_scale = 1.0;
  const std::vector<double> ref(2, 1.1 * steady_total());
  const MpcProblem pa = build_qp(model(), a, ref, zero_states());
  const MpcProblem pb = build_qp(model(), b, ref, zero_states());
  testing::Rng rng(8);
  const Vector x = rng.vector(pa.qp.num_vars());
  EXPECT_NEAR(primal_objective(pa.qp, x), primal_objective(pb.qp, x),
              1e-9 * std::abs(primal_objective(pb.qp, x)));
}

}  // namespace
}  // namespace hpv
