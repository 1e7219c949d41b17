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

#ifndef HPV_PROBLEM_CORE_HPP
#define HPV_PROBLEM_CORE_HPP

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hpv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Block-sparse matrix: (row subsystem, column subsystem) -> dense block.
/// Absent keys are zero blocks.
using BlockMap = std::map<std::pair<int, int>, Matrix>;

///
/// Block-structured strongly convex QP with a 1-norm penalty:
///
///   min  1/2 x'Hx + g'x + gamma * |x_a|_1
///   s.t. A x = b,  C x <= d,  x_a = P x - p
///
/// H is block diagonal over the partition x = [x_1; ...; x_M]. Rows of A, C
/// and P are likewise owned by subsystems: block (i, j) of A has q_i rows and
/// n_j columns, where q_i is the length of eq_rhs[i].
///
struct PartitionedQP {
  std::vector<int> partition;
  std::vector<Matrix> quad_blocks;
  std::vector<Vector> lin_cost;
  BlockMap eq_blocks;
  std::vector<Vector> eq_rhs;
  BlockMap ineq_blocks;
  std::vector<Vector> ineq_rhs;
  BlockMap onenorm_blocks;
  std::vector<Vector> onenorm_offset;
  double gamma = 1.0;

  int num_subsystems() const { return static_cast<int>(partition.size()); }
  int num_vars() const;
  int num_eq() const;
  int num_ineq() const;
  int num_onenorm() const;
  int var_offset(int i) const;
  int eq_rows(int i) const { return static_cast<int>(eq_rhs[i].size()); }
  int ineq_rows(int i) const { return static_cast<int>(ineq_rhs[i].size()); }
  int onenorm_rows(int i) const {
    return static_cast<int>(onenorm_offset[i].size());
  }

  // Dense assembly, mostly for oracles and small problems.
  Matrix dense_hessian() const;
  Vector stacked_lin_cost() const;
  Matrix dense_eq() const;
  Matrix dense_ineq() const;
  Matrix dense_onenorm() const;
  Vector stacked_eq_rhs() const;
  Vector stacked_ineq_rhs() const;
  Vector stacked_onenorm_offset() const;

  /// Empty problem with the given partition: H_i = I, g_i = 0, no rows.
  static PartitionedQP with_partition(const std::vector<int>& sizes,
                                      double gamma = 1.0);
};

/// Dual variables, partitioned like the constraint rows.
struct DualPoint {
  std::vector<Vector> lambda;
  std::vector<Vector> mu;
  std::vector<Vector> nu;

  static DualPoint zeros(const PartitionedQP& qp);
  Vector stacked_lambda() const;
  Vector stacked_mu() const;
  Vector stacked_nu() const;
};

struct KktReport {
  double stationarity_residual = 0.0;
  double eq_violation = 0.0;
  double ineq_violation = 0.0;
  double complementary_slackness_gap = 0.0;
  double onenorm_subgradient_gap = 0.0;

  double max() const;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

using Neighborhoods = std::vector<std::set<int>>;

ValidationReport validate_problem(const PartitionedQP& qp);

/// j is in N_i iff any of A_ij, A_ji, C_ij, C_ji, P_ij, P_ji is a nonzero
/// block. i is always in N_i.
Neighborhoods compute_neighborhoods(const PartitionedQP& qp);

/// Spectral norm of G H^-1 G' with G = [A; C; P]. Throws std::domain_error if
/// a cost block is not positive definite.
double lipschitz_constant(const PartitionedQP& qp);

/// Negative dual function
///   f = 1/2 v' H^-1 v + b'lambda + d'mu + p'nu,  v = g + A'lambda + C'mu + P'nu.
double dual_value(const PartitionedQP& qp, const DualPoint& dp);

/// Minimizer of the Lagrangian for fixed duals: x = -H^-1 v.
Vector lagrangian_minimizer(const PartitionedQP& qp, const DualPoint& dp);

double primal_objective(const PartitionedQP& qp, const Vector& x);

KktReport kkt_residuals(const PartitionedQP& qp, const Vector& x,
                        const Vector& x_aux, const DualPoint& dp);

/// Slice of a stacked primal vector belonging to subsystem i.
Vector subsystem_slice(const PartitionedQP& qp, const Vector& x, int i);

/// Inverse of subsystem_slice over all subsystems.
Vector stack(const std::vector<Vector>& parts);

bool is_nonzero_block(const Matrix& m);

}  // namespace hpv

#endif  // HPV_PROBLEM_CORE_HPP
