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

#include <cstring>

#include <gtest/gtest.h>

#include "hpv/dist_solver.hpp"
#include "hpv/network.hpp"
#include "test_support.hpp"

namespace hpv {
namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

// Single subsystem, one row of each family, all coefficients 1.
PartitionedQP unit_rows(double b, double d, double p, double gamma = 1.0) {
  PartitionedQP qp = PartitionedQP::with_partition({1}, gamma);
  qp.eq_blocks[{0, 0}] = m1(1.0);
  qp.eq_rhs[0] = v1(b);
  qp.ineq_blocks[{0, 0}] = m1(1.0);
  qp.ineq_rhs[0] = v1(d);
  qp.onenorm_blocks[{0, 0}] = m1(1.0);
  qp.onenorm_offset[0] = v1(p);
  return qp;
}

SolverOptions tight(int max_iterations = 100000) {
  SolverOptions o;
  o.stop.eps_eq = o.stop.eps_ineq = 1e-8;
  o.stop.eps_f = 1e-12;
  o.stop.max_iterations = max_iterations;
  return o;
}

TEST(AccelerationWeight, KnownValues) {
  EXPECT_DOUBLE_EQ(acceleration_weight(0), -0.5);
  EXPECT_DOUBLE_EQ(acceleration_weight(1), 0.0);
  EXPECT_DOUBLE_EQ(acceleration_weight(10), 0.75);
  for (int k = 1; k < 1000; ++k) {
    EXPECT_LT(acceleration_weight(k), acceleration_weight(k + 1));
    EXPECT_LT(acceleration_weight(k), 1.0);
  }
}

TEST(LocalPrimalUpdate, ScalarExample) {
  PartitionedQP qp = PartitionedQP::with_partition({1});
  qp.eq_blocks[{0, 0}] = m1(1.0);
  qp.eq_rhs[0] = v1(0.0);
  AgentState a = make_agent(qp, compute_neighborhoods(qp), 0, 1.0);
  DualBlock d{v1(2.0), Vector(0), Vector(0)};
  const auto [x, xbar] = local_primal_update(a, {{0, d}});
  EXPECT_DOUBLE_EQ(x(0), -2.0);
  // k = 0: w = -1/2 and x_prev = 0.
  EXPECT_DOUBLE_EQ(xbar(0), -2.0 - 0.5 * -2.0);
}

TEST(LocalDualUpdate, GradientStepAndProjections) {
  AgentState a = make_agent(unit_rows(2.0, 5.0, 0.0, 0.5),
                            compute_neighborhoods(unit_rows(2.0, 5.0, 0.0)), 0,
                            1.0);
  const DualBlock d = local_dual_update(a, {{0, v1(3.0)}});
  EXPECT_DOUBLE_EQ(d.lambda(0), 1.0);  // 0 + (3 - 2) / 1
  EXPECT_DOUBLE_EQ(d.mu(0), 0.0);      // 0 + (3 - 5) clipped at 0
  EXPECT_DOUBLE_EQ(d.nu(0), 0.5);      // 0 + 3 clipped at gamma
  EXPECT_DOUBLE_EQ(a.eq_residual, 1.0);
  EXPECT_DOUBLE_EQ(a.ineq_residual, 0.0);
  EXPECT_EQ(a.k, 1);
}

TEST(LocalDualUpdate, LipschitzDividesTheStep) {
  const PartitionedQP qp = unit_rows(0.0, -8.0, 0.0, 100.0);
  AgentState a = make_agent(qp, compute_neighborhoods(qp), 0, 4.0);
  const DualBlock d = local_dual_update(a, {{0, v1(2.0)}});
  EXPECT_DOUBLE_EQ(d.lambda(0), 0.5);
  EXPECT_DOUBLE_EQ(d.mu(0), 2.5);
  EXPECT_DOUBLE_EQ(d.nu(0), 0.5);
}

TEST(LocalUpdates, RejectMissingAndForeignData) {
  PartitionedQP qp = PartitionedQP::with_partition({1, 1, 1});
  qp.eq_blocks[{0, 0}] = m1(1.0);
  qp.eq_blocks[{0, 1}] = m1(1.0);
  qp.eq_rhs[0] = v1(0.0);
  const Neighborhoods nb = compute_neighborhoods(qp);
  AgentState a = make_agent(qp, nb, 0, 1.0);
  const DualBlock zero{v1(0.0), Vector(0), Vector(0)};
  const DualBlock none{Vector(0), Vector(0), Vector(0)};
  try {
    local_primal_update(a, {{0, zero}});
    FAIL() << "expected a throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("missing data from neighbor"),
              std::string::npos);
  }
  try {
    local_dual_update(a, {{0, v1(0.0)}, {1, v1(0.0)}, {2, v1(0.0)}});
    FAIL() << "expected a throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("data from non-neighbor"),
              std::string::npos);
  }
  EXPECT_NO_THROW(local_primal_update(a, {{0, zero}, {1, none}}));
}

TEST(MakeAgent, RejectsIndefiniteHessian) {
  PartitionedQP qp = PartitionedQP::with_partition({2});
  qp.quad_blocks[0] = Matrix::Identity(2, 2);
  qp.quad_blocks[0](1, 1) = -1.0;
  EXPECT_THROW(make_agent(qp, compute_neighborhoods(qp), 0, 1.0),
               std::domain_error);
  EXPECT_THROW(make_agent(PartitionedQP::with_partition({1}),
                          {{0}}, 0, 0.0),
               std::invalid_argument);
}

TEST(RunRounds, ScalarEqualityConvergesToOne) {
  // min 1/2 x^2 - x s.t. x = 1 is trivially 1; drop the row too.
  PartitionedQP qp = PartitionedQP::with_partition({1});
  qp.lin_cost[0] = v1(-1.0);
  qp.eq_blocks[{0, 0}] = m1(1.0);
  qp.eq_rhs[0] = v1(1.0);
  const SolveOutcome out = run_rounds(qp, {}, tight());
  EXPECT_NEAR(out.x(0), 1.0, 1e-6);
  EXPECT_EQ(out.reason, TerminationReason::kTolerance);
}

TEST(RunRounds, ActiveInequalityGivesMultiplier) {
  // min 1/2 x^2 - 2x s.t. x <= 1: x = 1, mu = 1.
  PartitionedQP qp = PartitionedQP::with_partition({1});
  qp.lin_cost[0] = v1(-2.0);
  qp.ineq_blocks[{0, 0}] = m1(1.0);
  qp.ineq_rhs[0] = v1(1.0);
  const SolveOutcome out = run_rounds(qp, {}, tight());
  EXPECT_NEAR(out.x(0), 1.0, 1e-5);
  EXPECT_NEAR(out.duals.mu[0](0), 1.0, 1e-5);
}

TEST(RunRounds, OneNormShrinkage) {
  // min 1/2 x^2 - 3x + |x|: soft threshold gives x = 2, nu = 1.
  PartitionedQP qp = PartitionedQP::with_partition({1});
  qp.lin_cost[0] = v1(-3.0);
  qp.onenorm_blocks[{0, 0}] = m1(1.0);
  qp.onenorm_offset[0] = v1(0.0);
  const SolveOutcome out = run_rounds(qp, {}, tight());
  EXPECT_NEAR(out.x(0), 2.0, 1e-6);
  EXPECT_NEAR(out.duals.nu[0](0), 1.0, 1e-6);
  EXPECT_NEAR(out.x_aux(0), 2.0, 1e-6);
}

TEST(RunRounds, NoRowsStopsAfterOneRound) {
  PartitionedQP qp = PartitionedQP::with_partition({2, 3});
  qp.lin_cost[0] = Vector::Constant(2, 4.0);
  const SolveOutcome out = run_rounds(qp, {}, SolverOptions{});
  EXPECT_EQ(out.iterations, 1);
  EXPECT_NEAR(out.x(0), -4.0, 1e-15);
  EXPECT_EQ(out.totals.messages, 0);
}

TEST(RunRounds, FixedIterationsRunsExactlyThatMany) {
  const auto qp = testing::random_qp(11).qp;
  SolverOptions o;
  o.stop = StoppingRule::fixed(37);
  const SolveOutcome out = run_rounds(qp, {}, o);
  EXPECT_EQ(out.iterations, 37);
  EXPECT_EQ(out.dual_history.size(), 37u);
  EXPECT_EQ(out.reason, TerminationReason::kFixedIterations);
}

TEST(RunRounds, RejectsEmptyBudgetAndInvalidProblem) {
  SolverOptions o;
  o.stop = StoppingRule::fixed(0);
  EXPECT_THROW(run_rounds(unit_rows(0, 0, 0), {}, o), std::invalid_argument);
  PartitionedQP bad = unit_rows(0, 0, 0);
  bad.quad_blocks[0] = m1(-1.0);
  EXPECT_THROW(run_rounds(bad, {}, SolverOptions{}), std::invalid_argument);
}

TEST(RunRounds, MaxIterationsIsReported) {
  const auto qp = testing::random_qp(12).qp;
  SolverOptions o = tight(5);
  const SolveOutcome out = run_rounds(qp, {}, o);
  EXPECT_EQ(out.iterations, 5);
  EXPECT_EQ(out.reason, TerminationReason::kMaxIterations);
}

TEST(RunRounds, WarmStartNeedsFewerIterations) {
  int cold_total = 0, warm_total = 0;
  for (int s = 0; s < 5; ++s) {
    auto inst = testing::random_qp(20 + s);
    SolverOptions o;
    o.stop.eps_eq = o.stop.eps_ineq = 1e-5;
    o.stop.eps_f = 1e-9;
    o.stop.max_iterations = 100000;
    const SolveOutcome first = run_rounds(inst.qp, {}, o);
    PartitionedQP next = inst.qp;
    for (auto& g : next.lin_cost) g *= 1.01;
    const int cold = run_rounds(next, {}, o).iterations;
    const int warm = run_rounds(next, WarmStart::from(first), o).iterations;
    cold_total += cold;
    warm_total += warm;
  }
  EXPECT_LT(warm_total, cold_total);
}

TEST(RunRounds, DualIteratesStayFeasible) {
  for (int s = 0; s < 10; ++s) {
    const auto qp = testing::random_qp(40 + s, {}).qp;
    SolverOptions o;
    o.stop = StoppingRule::fixed(200);
    bool ok = true;
    o.observer = [&](int, const std::vector<Vector>&,
                     const std::vector<DualBlock>& d) {
      for (const auto& b : d) {
        if (b.mu.size() && b.mu.minCoeff() < 0.0) ok = false;
        if (b.nu.size() && b.nu.cwiseAbs().maxCoeff() > qp.gamma) ok = false;
      }
    };
    run_rounds(qp, {}, o);
    EXPECT_TRUE(ok) << "seed " << s;
  }
}

TEST(RunRounds, DualValueDecreasesOverall) {
  // The monitored value is the negative dual; accelerated steps are not
  // monotone but the tail must sit below the start.
  for (int s = 0; s < 10; ++s) {
    const auto qp = testing::random_qp(60 + s).qp;
    SolverOptions o;
    o.stop = StoppingRule::fixed(500);
    const SolveOutcome out = run_rounds(qp, {}, o);
    EXPECT_LT(out.dual_history.back(), out.dual_history.front() + 1e-12);
  }
}

TEST(RunRounds, MatchesCentralizedBitForBit) {
  for (int s = 0; s < 5; ++s) {
    const auto qp = testing::random_qp(80 + s).qp;
    SolverOptions o;
    o.stop = StoppingRule::fixed(150);
    const SolveOutcome a = run_rounds(qp, {}, o);
    const SolveOutcome b = centralized_reference_run(qp, {}, o);
    ASSERT_EQ(a.x.size(), b.x.size());
    EXPECT_EQ(std::memcmp(a.x.data(), b.x.data(), sizeof(double) * a.x.size()), 0);
    EXPECT_EQ(a.dual_history, b.dual_history);
  }
}

TEST(RunRounds, WorkerCountDoesNotChangeResults) {
  const auto qp = testing::random_qp(99).qp;
  SolverOptions o;
  o.stop = StoppingRule::fixed(120);
  const SolveOutcome one = run_rounds(qp, {}, o);
  o.workers = 4;
  const SolveOutcome four = run_rounds(qp, {}, o);
  EXPECT_EQ(one.dual_history, four.dual_history);
  EXPECT_TRUE(one.x == four.x);
}

TEST(RunRounds, TrafficMatchesNeighborhoods) {
  const auto qp = testing::random_qp(5).qp;
  SolverOptions o;
  o.stop = StoppingRule::fixed(10);
  const SolveOutcome out = run_rounds(qp, {}, o);
  const Neighborhoods nb = compute_neighborhoods(qp);
  std::int64_t links = 0;
  for (const auto& n : nb) links += static_cast<std::int64_t>(n.size()) - 1;
  // Each round: one primal and one dual broadcast over every directed link.
  EXPECT_EQ(out.rounds.back().messages, 2 * links);
  EXPECT_EQ(out.totals.bits, 32 * out.totals.scalars);
}

TEST(RunRounds, ScaledRowsGiveTheSameSolution) {
  const auto inst = testing::random_qp(123);
  SolverOptions a = tight(200000), b = tight(200000);
  b.scale_rows = false;
  const SolveOutcome sa = run_rounds(inst.qp, {}, a);
  const SolveOutcome sb = run_rounds(inst.qp, {}, b);
  EXPECT_LT((sa.x - sb.x).lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST(OutcomeJson, HistoryCsvHasOneRowPerIteration) {
  SolverOptions o;
  o.stop = StoppingRule::fixed(7);
  const SolveOutcome out = run_rounds(testing::random_qp(3).qp, {}, o);
  const std::string csv = outcome_history_csv(out);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
  const Json j = outcome_to_json(out);
  EXPECT_EQ(j["iterations"], 7);
}

TEST(MessageNetwork, RejectsMessagesOutsideTheNeighborhood) {
  MessageNetwork net({{0, 1}, {0, 1}, {2}});
  EXPECT_NO_THROW(net.post(Message{0, 1, {Vector::Ones(3)}}));
  EXPECT_THROW(net.post(Message{0, 2, {Vector::Ones(3)}}), LocalityViolation);
  EXPECT_THROW(net.post(Message{2, 5, {}}), LocalityViolation);
}

TEST(MessageNetwork, DeliveryIsDeferredAndCounted) {
  MessageNetwork net({{0, 1}, {0, 1}}, 64);
  net.post(Message{0, 1, {Vector::Ones(3), Vector::Ones(2)}});
  EXPECT_TRUE(net.inbox(1).empty());
  net.deliver();
  ASSERT_EQ(net.inbox(1).size(), 1u);
  const RoundStats r = net.take_round_stats();
  EXPECT_EQ(r.messages, 1);
  EXPECT_EQ(r.scalars, 5);
  EXPECT_EQ(r.bits, 320);
  EXPECT_EQ(net.take_round_stats().messages, 0);
  EXPECT_EQ(net.cumulative().scalars, 5);
}

}  // namespace
}  // namespace hpv
