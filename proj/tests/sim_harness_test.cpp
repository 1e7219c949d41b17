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

#include <algorithm>

#include <gtest/gtest.h>

#include "hpv/model_io.hpp"
#include "hpv/scenario.hpp"
#include "hpv/sim_harness.hpp"

namespace hpv {
namespace {

const HpvModel& model() {
  static const HpvModel m = build_default_model(default_params());
  return m;
}

double steady_total() { return linearize_power(model()).offsets.sum(); }

SimConfig short_run(int steps = 3) {
  SimConfig c;
  c.steps = steps;
  return c;
}

TEST(SplitMix64, KnownFirstOutputs) {
  // Reference values of splitmix64 seeded with 0.
  SplitMix64 r(0);
  EXPECT_EQ(r.next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(r.next(), 0x6e789e6aa1b965f4ULL);
}

TEST(SplitMix64, SymmetricDrawsAreBounded) {
  SplitMix64 r(123);
  double lo = 1.0, hi = -1.0, sum = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double v = r.symmetric();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  EXPECT_GE(lo, -1.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_LT(lo, -0.999);
  EXPECT_GT(hi, 0.999);
  EXPECT_LT(std::abs(sum / 100000), 0.01);
}

TEST(DefaultReference, ShapeAndPeriod) {
  const double ts = 1800.0;
  const auto r = default_reference(100.0, 96, ts, 0.3);
  ASSERT_EQ(r.size(), 96u);
  EXPECT_DOUBLE_EQ(r[8], 70.0);    // 04:00 trough
  EXPECT_DOUBLE_EQ(r[22], 130.0);  // 11:00 peak
  for (int k = 0; k < 48; ++k) EXPECT_DOUBLE_EQ(r[k], r[k + 48]);
  EXPECT_EQ(*std::min_element(r.begin(), r.end()), 70.0);
  EXPECT_EQ(*std::max_element(r.begin(), r.end()), 130.0);
}

TEST(CommunicationAccounting, Product) {
  EXPECT_EQ(communication_accounting(1, 32, 1, 1), 32);
  EXPECT_EQ(communication_accounting(218, 32, 500, 20), 218LL * 32 * 500 * 20);
  EXPECT_THROW(communication_accounting(0, 32, 1, 1), std::invalid_argument);
  EXPECT_THROW(communication_accounting(1, 32, -5, 1), std::invalid_argument);
}

TEST(ClosedLoop, SteadyReferenceWithoutNoiseStaysPut) {
  SimConfig c = short_run(3);
  c.noise = false;
  c.reference.assign(20, steady_total());
  const ClosedLoopLog log = run_closed_loop(model(), c);
  ASSERT_EQ(log.steps.size(), 3u);
  for (const auto& r : log.steps) {
    EXPECT_LT(r.abs_error, 1e-3);
    EXPECT_LT(r.estimate_error, 1e-9);
    for (int u = 0; u < 10; ++u) {
      EXPECT_NEAR(r.flows[u], model().q_ss_physical[u], 1e-2);
    }
  }
}

TEST(ClosedLoop, DeterministicForAFixedSeed) {
  const SimConfig c = short_run();
  EXPECT_EQ(log_to_csv(run_closed_loop(model(), c)),
            log_to_csv(run_closed_loop(model(), c)));
  SimConfig other = c;
  other.seed = c.seed + 1;
  EXPECT_NE(log_to_csv(run_closed_loop(model(), c)),
            log_to_csv(run_closed_loop(model(), other)));
}

TEST(ClosedLoop, WorkersDoNotChangeTheLog) {
  SimConfig c = short_run(2);
  const std::string one = log_to_csv(run_closed_loop(model(), c));
  c.workers = 3;
  EXPECT_EQ(log_to_csv(run_closed_loop(model(), c)), one);
}

TEST(ClosedLoop, BookkeepingIsConsistent) {
  const ClosedLoopLog log = run_closed_loop(model(), short_run());
  for (const auto& r : log.steps) {
    EXPECT_EQ(r.bits, 32 * r.scalars);
    EXPECT_GE(r.input_margin, 0.0);
    EXPECT_LE(r.max_complementarity, 1e-6);
    EXPECT_EQ(r.local_refs.size(), 8u);
    double sum = 0.0;
    for (double p : r.local_refs) sum += p;
    EXPECT_EQ(sum, r.p_ref);
  }
  const std::string csv = log_to_csv(log);
  EXPECT_EQ(csv.rfind("k,p_ref,p_total", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const Json s = log_summary_json(log);
  EXPECT_EQ(s["total_bits"].get<std::int64_t>(), log.total_bits());
}

TEST(ClosedLoop, RejectsShortReference) {
  SimConfig c = short_run(5);
  c.reference.assign(3, steady_total());
  EXPECT_THROW(run_closed_loop(model(), c), std::invalid_argument);
  c.steps = 0;
  EXPECT_THROW(run_closed_loop(model(), c), std::invalid_argument);
}

TEST(ClosedLoop, SolverFailureIsReportedWithTheStep) {
  SimConfig c = short_run(2);
  c.stop.max_iterations = 3;
  c.complementarity_tol = -1.0;  // no solution can certify this
  try {
    run_closed_loop(model(), c);
    FAIL() << "expected SimulationError";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(Comparison, OneRowPerScheme) {
  const auto rows = run_comparison_suite(
      model(), short_run(2), {Scheme::kLocRefStat, Scheme::kDecentralized});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].scheme, Scheme::kDecentralized);
  EXPECT_EQ(comparison_to_json(rows).size(), 2u);
}

TEST(Scenario, DefaultsAndOverrides) {
  const Scenario s = scenario_from_json(Json::parse(R"({
    "horizon": 6, "scheme": "global-ref", "steps": 12, "seed": 3,
    "weights": {"rho_delta": 0.01}, "noise": {"enabled": false},
    "solver": {"fixed_iterations": 50}})"));
  EXPECT_EQ(s.config.mpc.horizon, 6);
  EXPECT_EQ(s.config.mpc.scheme, Scheme::kGlobalRef);
  EXPECT_EQ(s.config.seed, 3u);
  EXPECT_DOUBLE_EQ(s.config.mpc.weights.rho_delta, 0.01);
  EXPECT_DOUBLE_EQ(s.config.mpc.weights.r, 1.0);
  EXPECT_FALSE(s.config.noise);
  EXPECT_EQ(s.config.stop.mode, StoppingRule::Mode::kFixedIterations);
  EXPECT_FALSE(s.params.has_value());
}

TEST(Scenario, RoundTrip) {
  Scenario s;
  s.config.reference = {1.0, 2.0};
  s.params = default_params();
  const Json j = scenario_to_json(s);
  EXPECT_EQ(scenario_to_json(scenario_from_json(j)).dump(), j.dump());
}

TEST(Scenario, RejectsBadInput) {
  auto bad = [](const char* text) {
    EXPECT_THROW(scenario_from_json(Json::parse(text)), std::invalid_argument) << text;
  };
  bad(R"({"weigths": {}})");
  bad(R"({"weights": {"alpha": 1.0}})");
  bad(R"({"weights": {"q": "big"}})");
  bad(R"({"horizon": 0})");
  bad(R"({"horizon": 2.5})");
  bad(R"({"seed": -1})");
  bad(R"({"scheme": "fast"})");
  bad(R"({"noise": {"process": -0.1}})");
  bad(R"({"reference": [1], "reference_csv": "r.csv"})");
  bad(R"({"solver": {"window": 0}})");
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), std::invalid_argument);
}

TEST(ReferenceCsv, HeaderAndRows) {
  EXPECT_EQ(reference_from_csv("time,mw\n0,10.5\n1800,11\r\n\n"),
            (std::vector<double>{10.5, 11.0}));
  EXPECT_EQ(reference_from_csv("0,1\n1,2\n"), (std::vector<double>{1.0, 2.0}));
  EXPECT_THROW(reference_from_csv("0,1\n1,x\n"), std::invalid_argument);
  EXPECT_THROW(reference_from_csv("time,mw\n"), std::invalid_argument);
  EXPECT_THROW(reference_from_csv("5\n"), std::invalid_argument);
}

}  // namespace
}  // namespace hpv
