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

///
/// \file bnb.hpp
///
/// Pump/turbine complementarity. A reversible duct flow is split into a
/// turbine part and a pump part, both nonnegative, and only one may be
/// nonzero. The product constraint is replaced by a cross term in the cost;
/// when the relaxed optimum still runs both directions, the smaller flow of
/// each pair is pinned to zero and the problem is solved once more.
///
#ifndef HPV_BNB_HPP
#define HPV_BNB_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hpv/dist_solver.hpp"
#include "hpv/problem_core.hpp"

namespace hpv {

struct VirtualFlowPair {
  int subsystem = 0;    // owning subsystem, 0-based
  int step = 0;         // horizon index
  int turbine_var = 0;  // index within the subsystem's variables
  int pump_var = 0;
  double r_turbine = 1.0;
  double r_pump = 1.0;
  double alpha = 0.9;
};

/// [[R_T, a sqrt(R_T R_P)], [a sqrt(R_T R_P), R_P]]. Throws
/// std::invalid_argument unless R_T, R_P > 0 and 0 < alpha < 1.
Matrix build_relaxed_cost(double r_turbine, double r_pump, double alpha);

struct ComplementarityViolation {
  int pair = 0;
  int subsystem = 0;
  int step = 0;
  double q_turbine = 0.0;
  double q_pump = 0.0;
};

/// Pairs whose flow product is strictly greater than tol.
std::vector<ComplementarityViolation> complementarity_violations(
    const PartitionedQP& qp, const Vector& x,
    const std::vector<VirtualFlowPair>& pairs, double tol = 1e-6);

enum class PinnedFlow { kTurbine, kPump };

struct FlowPin {
  int pair = 0;
  int subsystem = 0;
  int var = 0;
  PinnedFlow flow = PinnedFlow::kPump;
};

/// One pin per pair: the pump is pinned when q_T > q_P, the turbine otherwise.
std::vector<FlowPin> choose_pins(const PartitionedQP& qp, const Vector& x,
                                 const std::vector<VirtualFlowPair>& pairs);

/// Appends a row x_var = 0 to the equality rows of each pin's subsystem.
PartitionedQP add_pins(const PartitionedQP& qp, const std::vector<FlowPin>& pins);

/// Lipschitz constants of the row-scaled problem, memoized by a caller key.
/// Only valid when the keyed problems share H, A, C and P.
class LipschitzCache {
 public:
  double get(const std::string& key, const PartitionedQP& qp,
             const SolverOptions& options);
  std::size_t size() const { return values_.size(); }

 private:
  std::map<std::string, double> values_;
};

struct TwoPhaseOptions {
  SolverOptions solver;
  double tol = 1e-6;
  LipschitzCache* cache = nullptr;  // optional
  std::string cache_key;
};

struct TwoPhaseResult {
  SolveOutcome outcome;          // final solve, pinned flows set to exactly 0
  PartitionedQP solved_problem;  // problem of the final phase
  int phases = 1;
  std::vector<FlowPin> pins;
  std::vector<ComplementarityViolation> phase1_violations;
  SolveOutcome phase1;
  int total_iterations = 0;
  RoundStats total_traffic;
};

TwoPhaseResult two_phase_solve(const PartitionedQP& relaxed,
                               const std::vector<VirtualFlowPair>& pairs,
                               const TwoPhaseOptions& options,
                               const std::optional<WarmStart>& warm = {});

/// Outcome JSON plus the phase count and pinned variables.
Json two_phase_to_json(const TwoPhaseResult& result);

}  // namespace hpv

#endif  // HPV_BNB_HPP
