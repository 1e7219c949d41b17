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

#include "hpv/bnb.hpp"

#include <cmath>
#include <stdexcept>

namespace hpv {
namespace {

double flow_value(const PartitionedQP& qp, const Vector& x, int subsystem,
                  int var) {
  return x[qp.var_offset(subsystem) + var];
}

void check_pair(const PartitionedQP& qp, const VirtualFlowPair& p) {
  if (p.subsystem < 0 || p.subsystem >= qp.num_subsystems() ||
      p.turbine_var < 0 || p.turbine_var >= qp.partition[p.subsystem] ||
      p.pump_var < 0 || p.pump_var >= qp.partition[p.subsystem]) {
    throw std::invalid_argument("flow pair refers to a missing variable");
  }
}

std::string pin_key(const std::vector<FlowPin>& pins) {
  std::string key;
  key.reserve(pins.size());
  for (const auto& p : pins) key += p.flow == PinnedFlow::kPump ? 'P' : 'T';
  return key;
}

}  // namespace

Matrix build_relaxed_cost(double r_turbine, double r_pump, double alpha) {
  if (!(r_turbine > 0.0) || !(r_pump > 0.0)) {
    throw std::invalid_argument("flow weights must be positive");
  }
  if (alpha >= 1.0) {
    throw std::invalid_argument(
        "alpha >= 1 makes the block singular or indefinite (determinant "
        "R_T R_P (1 - alpha^2) <= 0)");
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("alpha must be positive");
  }
  const double c = alpha * std::sqrt(r_pump * r_turbine);
  Matrix r(2, 2);
  r << r_turbine, c, c, r_pump;
  return r;
}

std::vector<ComplementarityViolation> complementarity_violations(
    const PartitionedQP& qp, const Vector& x,
    const std::vector<VirtualFlowPair>& pairs, double tol) {
  std::vector<ComplementarityViolation> out;
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    const auto& p = pairs[n];
    check_pair(qp, p);
    const double qt = flow_value(qp, x, p.subsystem, p.turbine_var);
    const double qp_ = flow_value(qp, x, p.subsystem, p.pump_var);
    if (qt * qp_ > tol) {
      out.push_back({static_cast<int>(n), p.subsystem, p.step, qt, qp_});
    }
  }
  return out;
}

std::vector<FlowPin> choose_pins(const PartitionedQP& qp, const Vector& x,
                                 const std::vector<VirtualFlowPair>& pairs) {
  std::vector<FlowPin> pins;
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    const auto& p = pairs[n];
    check_pair(qp, p);
    const double qt = flow_value(qp, x, p.subsystem, p.turbine_var);
    const double qp_ = flow_value(qp, x, p.subsystem, p.pump_var);
    FlowPin pin;
    pin.pair = static_cast<int>(n);
    pin.subsystem = p.subsystem;
    if (qt > qp_) {
      pin.flow = PinnedFlow::kPump;
      pin.var = p.pump_var;
    } else {
      pin.flow = PinnedFlow::kTurbine;
      pin.var = p.turbine_var;
    }
    pins.push_back(pin);
  }
  return pins;
}

PartitionedQP add_pins(const PartitionedQP& qp,
                       const std::vector<FlowPin>& pins) {
  PartitionedQP out = qp;
  const int m = qp.num_subsystems();
  std::vector<std::vector<int>> vars(m);
  for (const auto& p : pins) vars.at(p.subsystem).push_back(p.var);
  for (int i = 0; i < m; ++i) {
    if (vars[i].empty()) continue;
    const int old_rows = qp.eq_rows(i);
    const int extra = static_cast<int>(vars[i].size());
    const int rows = old_rows + extra;
    for (int j = 0; j < m; ++j) {
      auto it = out.eq_blocks.find({i, j});
      if (it == out.eq_blocks.end()) {
        if (j != i) continue;
        it = out.eq_blocks.emplace(std::make_pair(i, i),
                                   Matrix::Zero(old_rows, qp.partition[i]))
                 .first;
      }
      Matrix grown = Matrix::Zero(rows, qp.partition[j]);
      grown.topRows(old_rows) = it->second;
      if (j == i) {
        for (int r = 0; r < extra; ++r) grown(old_rows + r, vars[i][r]) = 1.0;
      }
      it->second = std::move(grown);
    }
    Vector rhs = Vector::Zero(rows);
    rhs.head(old_rows) = qp.eq_rhs[i];
    out.eq_rhs[i] = std::move(rhs);
  }
  return out;
}

double LipschitzCache::get(const std::string& key, const PartitionedQP& qp,
                           const SolverOptions& options) {
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  SolverOptions probe = options;
  probe.lipschitz = 1.0;  // skip the computation inside prepare_problem
  const PreparedProblem prep = prepare_problem(qp, probe);
  const double l = lipschitz_constant(prep.scaled);
  values_.emplace(key, l);
  return l;
}

TwoPhaseResult two_phase_solve(const PartitionedQP& relaxed,
                               const std::vector<VirtualFlowPair>& pairs,
                               const TwoPhaseOptions& options,
                               const std::optional<WarmStart>& warm) {
  for (const auto& p : pairs) check_pair(relaxed, p);
  TwoPhaseResult res;

  SolverOptions opts = options.solver;
  if (options.cache && !opts.lipschitz) {
    opts.lipschitz = options.cache->get(options.cache_key + "|relaxed", relaxed,
                                        options.solver);
  }
  res.phase1 = run_rounds(relaxed, warm, opts);
  res.total_iterations = res.phase1.iterations;
  res.total_traffic = res.phase1.totals;
  res.phase1_violations =
      complementarity_violations(relaxed, res.phase1.x, pairs, options.tol);
  if (res.phase1_violations.empty()) {
    res.outcome = res.phase1;
    res.solved_problem = relaxed;
    res.phases = 1;
    return res;
  }

  res.pins = choose_pins(relaxed, res.phase1.x, pairs);
  res.solved_problem = add_pins(relaxed, res.pins);
  SolverOptions opts2 = options.solver;
  if (options.cache && !opts2.lipschitz) {
    opts2.lipschitz = options.cache->get(
        options.cache_key + "|" + pin_key(res.pins), res.solved_problem,
        options.solver);
  }
  res.outcome = run_rounds(res.solved_problem, WarmStart::from(res.phase1), opts2);
  res.phases = 2;
  res.total_iterations += res.outcome.iterations;
  res.total_traffic.messages += res.outcome.totals.messages;
  res.total_traffic.scalars += res.outcome.totals.scalars;
  res.total_traffic.bits += res.outcome.totals.bits;

  // Pinned flows are zero up to the solver tolerance; make it exact so the
  // certificate does not depend on it.
  for (const auto& pin : res.pins) {
    res.outcome.x[relaxed.var_offset(pin.subsystem) + pin.var] = 0.0;
  }
  const Matrix p = res.solved_problem.dense_onenorm();
  if (p.rows() > 0) {
    res.outcome.x_aux =
        p * res.outcome.x - res.solved_problem.stacked_onenorm_offset();
  }
  if (!complementarity_violations(relaxed, res.outcome.x, pairs, options.tol)
           .empty()) {
    throw std::logic_error("pinned solution still violates complementarity");
  }
  return res;
}

Json two_phase_to_json(const TwoPhaseResult& result) {
  Json j = outcome_to_json(result.outcome);
  j["phases"] = result.phases;
  j["total_iterations"] = result.total_iterations;
  Json pins = Json::array();
  for (const auto& p : result.pins) {
    pins.push_back({{"pair", p.pair},
                    {"subsystem", p.subsystem},
                    {"var", p.var},
                    {"flow", p.flow == PinnedFlow::kPump ? "pump" : "turbine"}});
  }
  j["pins"] = std::move(pins);
  j["phase1_violations"] = result.phase1_violations.size();
  return j;
}

}  // namespace hpv
