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
/// \file dist_solver.hpp
///
/// Distributed accelerated dual gradient method. Each subsystem runs an
/// agent that owns its primal block x_i and its dual rows (lambda_i, mu_i,
/// nu_i). One iteration k is a synchronous round:
///
///   1. x_i   = -H_i^-1 (g_i + sum_{j in N_i} A_ji' lambda_j + C_ji' mu_j + P_ji' nu_j)
///      xb_i  = x_i + w_k (x_i - x_i^prev),            w_k = (k - 1) / (k + 2)
///   2. send xb_i to every neighbor
///   3. lambda_i += w_k (lambda_i - lambda_i^prev) + (sum_j A_ij xb_j - b_i) / L
///      mu_i, nu_i likewise, projected onto [0, inf) and [-gamma, gamma]
///   4. send the new duals to every neighbor
///
/// This is the accelerated projected gradient method applied to the negative
/// dual function, so it inherits the O(1/k^2) rate in dual value.
///
#ifndef HPV_DIST_SOLVER_HPP
#define HPV_DIST_SOLVER_HPP

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SparseCore>

#include "hpv/json_io.hpp"
#include "hpv/network.hpp"
#include "hpv/problem_core.hpp"

namespace hpv {

struct DualBlock {
  Vector lambda;
  Vector mu;
  Vector nu;
};

using SparseBlock = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Data and iterates of one subsystem. Coupling blocks are stored sorted by
/// neighbor index; "row" blocks are M_ij (own rows), "col" blocks are M_ji
/// (neighbor rows acting on own variables).
struct AgentState {
  int index = 0;
  std::vector<int> neighbors;  // sorted, includes index

  Matrix H;
  Eigen::LLT<Matrix> H_factor;
  SparseBlock H_inv;  // from H_factor; keeps the block pattern of H
  Vector g;
  std::vector<std::pair<int, SparseBlock>> eq_row, ineq_row, onenorm_row;
  std::vector<std::pair<int, SparseBlock>> eq_col, ineq_col, onenorm_col;
  Vector b, d, p;
  double gamma = 1.0;
  double lipschitz = 1.0;

  Vector x;       // x^k after step 1 (x^{-1} before the first round)
  Vector x_prev;  // x^{k-1}
  Vector x_bar;
  DualBlock dual;       // lambda^k, mu^k, nu^k
  DualBlock dual_prev;  // values at k-1
  int k = 0;

  // Scaled-row residual norms from the last dual update, measured at xb.
  double eq_residual = 0.0;
  double ineq_residual = 0.0;
};

class SolverDivergence : public std::runtime_error {
 public:
  SolverDivergence(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct StoppingRule {
  enum class Mode { kComposite, kFixedIterations };

  Mode mode = Mode::kComposite;
  double eps_eq = 1e-3;
  double eps_ineq = 1e-3;
  double eps_f = 1e-6;  // relative to max(1, |f|)
  int window = 10;
  int max_iterations = 5000;
  int fixed_iterations = 0;

  static StoppingRule fixed(int iterations);
};

enum class TerminationReason { kTolerance, kMaxIterations, kFixedIterations };

std::string to_string(TerminationReason r);

struct SolveOutcome {
  Vector x;      // x^k of the terminating round, original units
  Vector x_aux;  // P x - p
  DualPoint duals;
  int iterations = 0;
  std::vector<double> dual_history;  // f(lambda^k, mu^k, nu^k), k = 0..iterations-1
  std::vector<double> eq_residual_history;    // scaled, at xbar^k
  std::vector<double> ineq_residual_history;  // scaled, at xbar^k
  std::vector<RoundStats> rounds;
  RoundStats totals;
  TerminationReason reason = TerminationReason::kTolerance;
  double lipschitz = 0.0;
};

/// Called once per round after step 3 with x^k and the updated duals.
using IterationObserver = std::function<void(
    int k, const std::vector<Vector>& x, const std::vector<DualBlock>& duals)>;

struct SolverOptions {
  StoppingRule stop;
  bool scale_rows = true;
  int workers = 1;
  int bits_per_scalar = 32;
  /// Precomputed Lipschitz constant of the scaled problem; computed if empty.
  std::optional<double> lipschitz;
  IterationObserver observer;
};

/// Warm-start values: previous primal and duals in original units. Dual blocks
/// whose lengths differ from the new problem are zero-padded or truncated.
struct WarmStart {
  Vector x;
  DualPoint duals;

  static WarmStart from(const SolveOutcome& outcome);
};

/// Problem after optional unit row scaling of A and C, with the data the
/// iteration needs. The 1-norm rows are never rescaled since that would
/// change the penalty.
struct PreparedProblem {
  PartitionedQP scaled;
  std::vector<Vector> eq_scale;
  std::vector<Vector> ineq_scale;
  Neighborhoods neighborhoods;
  double lipschitz = 0.0;
};

PreparedProblem prepare_problem(const PartitionedQP& qp,
                                const SolverOptions& options);

double acceleration_weight(int k);

AgentState make_agent(const PartitionedQP& qp, const Neighborhoods& nb, int i,
                      double lipschitz);

/// Step 1. neighbor_duals must hold exactly the subsystems in N_i (own index
/// included). Returns (x_i^k, xbar_i^k) and shifts the primal memory.
std::pair<Vector, Vector> local_primal_update(
    AgentState& agent, const std::map<int, DualBlock>& neighbor_duals);

/// Step 3. neighbor_primals must hold xbar_j for exactly the subsystems in
/// N_i. Returns the new duals, shifts the dual memory and advances k.
DualBlock local_dual_update(AgentState& agent,
                            const std::map<int, Vector>& neighbor_primals);

SolveOutcome run_rounds(const PartitionedQP& qp,
                        const std::optional<WarmStart>& warm,
                        const SolverOptions& options);

/// Same iteration with all data in one place and no message passing.
SolveOutcome centralized_reference_run(const PartitionedQP& qp,
                                       const std::optional<WarmStart>& warm,
                                       const SolverOptions& options);

/// Solution, duals, termination data and the dual-value history.
Json outcome_to_json(const SolveOutcome& outcome);

/// One row per iteration: k, dual value, residuals, messages, scalars, bits.
std::string outcome_history_csv(const SolveOutcome& outcome);

}  // namespace hpv

#endif  // HPV_DIST_SOLVER_HPP
