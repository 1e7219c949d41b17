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
/// \file mpc_builder.hpp
///
/// Horizon-N tracking MPC in partitioned form. Subsystem i owns the variables
///
///   [q_i(0), xr_i(1), q_i(1), xr_i(2), ..., q_i(N-1), xr_i(N), delta_i]
///
/// where q_i are its owned inputs in units of flow_scale, xr_i its reduced
/// state and delta_i (LOC-REF-DYN only) the exchanged references delta_ij(k)
/// for j in its managed set, stacked by step. The estimate xr_i(0) enters the
/// right-hand sides. The power tracking error enters only through the 1-norm
/// rows, one per step and subsystem (one per step in total for GLOBAL-REF).
///
#ifndef HPV_MPC_BUILDER_HPP
#define HPV_MPC_BUILDER_HPP

#include <string>
#include <vector>

#include "hpv/bnb.hpp"
#include "hpv/hpv_model.hpp"
#include "hpv/problem_core.hpp"

namespace hpv {

enum class Scheme { kGlobalRef, kLocRefStat, kLocRefDyn, kDecentralized };

/// "global-ref", "loc-ref-stat", "loc-ref-dyn", "decentralized".
std::string to_string(Scheme s);
/// Throws std::invalid_argument("unknown scheme '...'").
Scheme scheme_from_string(const std::string& s);

struct MpcWeights {
  double q = 1e-2;          // on reduced states
  double r = 1.0;           // on inputs in units of flow_scale
  double gamma = 1.0;       // per MW of tracking error
  double rho_delta = 3e-3;  // per MW^2 of exchanged reference
  double alpha = 0.9;       // turbine/pump cross term
  double flow_scale = 100.0;     // m^3/s per input unit
  double output_backoff = 0.15;  // m, tightening of the level boxes
  /// MW per unit of the tracking rows. Rows are divided by it and gamma is
  /// multiplied by it, so the problem is unchanged; only the relative
  /// conditioning against the dynamics rows moves.
  double power_scale = 20.0;
};

struct MpcScenario {
  int horizon = 10;
  Scheme scheme = Scheme::kLocRefDyn;
  MpcWeights weights;
};

/// Managed links: subsystem i leads the exchange with every j in N_i, j > i.
struct ExchangeStructure {
  std::vector<std::vector<int>> managed;  // sorted

  int num_links() const;
  /// Position of j in managed[i], or -1.
  int link_index(int i, int j) const;
};

ExchangeStructure build_exchange_structure(const Neighborhoods& nb);

/// Splits a total reference proportionally to the steady-state powers.
/// Rows are steps, columns subsystems; every row sums to p_ref(k) exactly
/// (the last subsystem absorbs the rounding). Throws std::invalid_argument if
/// the steady powers sum to zero.
Matrix static_division(const std::vector<double>& p_ref,
                       const Vector& steady_powers);

/// delta[k](i, j) holds delta_ij(k) for j in managed[i]; other entries are
/// ignored. Returns max_k |sum_i local_i(k) - p_ref(k)| where local_i adds
/// the managed deltas and subtracts the ones managed by neighbors.
double reference_preservation_check(const ExchangeStructure& ex,
                                    const Matrix& local_refs,
                                    const std::vector<Matrix>& delta,
                                    const std::vector<double>& p_ref);

struct SubsystemLayout {
  std::vector<int> inputs;  // model input indices owned by the subsystem
  int order = 0;            // reduced states
  int horizon = 0;
  int deltas = 0;           // managed links (LOC-REF-DYN)

  int stage() const { return static_cast<int>(inputs.size()) + order; }
  int input_var(int k, int pos) const { return k * stage() + pos; }
  /// k = 1..N
  int state_var(int k, int s) const {
    return (k - 1) * stage() + static_cast<int>(inputs.size()) + s;
  }
  int delta_var(int k, int link) const {
    return horizon * stage() + k * deltas + link;
  }
  int size() const { return horizon * stage() + horizon * deltas; }
};

struct MpcProblem {
  PartitionedQP qp;
  std::vector<VirtualFlowPair> pairs;
  std::vector<SubsystemLayout> layout;
  ExchangeStructure exchange;
  Matrix local_refs;  // N x M, static division (empty for GLOBAL-REF)
  Scheme scheme = Scheme::kGlobalRef;
};

/// Coupling pattern of the reduced model: dynamics through inputs and power
/// through levels, i.e. the LOC-REF neighborhoods.
Neighborhoods model_neighborhoods(const HpvModel& model);

/// Builds the QP for reference p_ref(0..N-1) (total, MW) and reduced state
/// estimates x0 (one per subsystem, deviation). The model must be augmented
/// and reduced. Throws std::invalid_argument on inconsistent data.
MpcProblem build_qp(const HpvModel& model, const MpcScenario& scenario,
                    const std::vector<double>& p_ref,
                    const std::vector<Vector>& x0);

/// Applied inputs q(0) in model units (m^3/s deviation), all subsystems.
Vector first_inputs(const MpcProblem& problem, const HpvModel& model,
                    const Vector& x, double flow_scale);

/// Predicted reduced states xr_i(k), k = 1..N, of subsystem i.
std::vector<Vector> predicted_states(const MpcProblem& problem, const Vector& x,
                                     int i);

/// delta[k](i, j) read back from a solution (LOC-REF-DYN).
std::vector<Matrix> exchanged_references(const MpcProblem& problem,
                                         const Vector& x);

}  // namespace hpv

#endif  // HPV_MPC_BUILDER_HPP
