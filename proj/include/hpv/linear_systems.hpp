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

#ifndef HPV_LINEAR_SYSTEMS_HPP
#define HPV_LINEAR_SYSTEMS_HPP

#include <utility>

#include "hpv/problem_core.hpp"

namespace hpv {

/// Exact zero-order hold of dx/dt = Ax + Bu over ts seconds, from the
/// exponential of [[A, B], [0, 0]] * ts.
std::pair<Matrix, Matrix> zoh_discretize(const Matrix& a, const Matrix& b,
                                         double ts);

double spectral_radius(const Matrix& a);

/// Solves X = A X A' + Q for Schur-stable A by squared Smith iteration.
Matrix discrete_lyapunov(const Matrix& a, const Matrix& q);

/// Square root of a symmetric positive semidefinite matrix, as a factor F
/// with F F' = M (negative eigenvalues from rounding are clipped).
Matrix psd_factor(const Matrix& m);

///
/// Coordinates x = V z_u + U z_s that separate the eigenvalue-one modes of a
/// discrete system from the rest. With T = [(W'V)^-1 W'; U'(I - V(W'V)^-1 W')]
/// and T^-1 = [V U], T A T^-1 is block diagonal with an identity block.
///
struct UnitModeSplit {
  Matrix V;  // right eigenvectors for eigenvalue 1
  Matrix U;  // orthonormal basis of the complement
  Matrix T;
  Matrix T_inv;
  int unit_modes = 0;
};

UnitModeSplit split_unit_modes(const Matrix& a, double tol = 1e-9);

struct BalancedReduction {
  Matrix T;      // r x n
  Matrix T_inv;  // n x r
  Vector hankel_singular_values;  // stable part, descending
  int unit_modes = 0;
  int minimal_order = 0;  // unit modes + significant Hankel singular values
};

/// Balanced truncation of (A, B, C) to `order` states. Eigenvalue-one modes
/// are kept as they are and count towards the order; the remaining part must
/// be Schur stable. Throws std::invalid_argument if order exceeds the
/// minimal order or is smaller than the number of unit modes.
BalancedReduction balanced_truncation(const Matrix& a, const Matrix& b,
                                      const Matrix& c, int order,
                                      double hsv_tol = 1e-10);

/// Minimal order as used by balanced_truncation.
int minimal_order(const Matrix& a, const Matrix& b, const Matrix& c,
                  double hsv_tol = 1e-10);

struct RiccatiResult {
  Matrix P;  // steady-state prediction error covariance
  Matrix K;  // predictor gain A P C' (C P C' + R)^-1
  int iterations = 0;
};

/// Iterates the one-step predictor Riccati recursion to its fixed point.
/// Throws std::domain_error if it fails to converge (undetectable pair).
RiccatiResult predictor_riccati(const Matrix& a, const Matrix& c,
                                const Matrix& q, const Matrix& r,
                                double tol = 1e-12, int max_iter = 100000);

}  // namespace hpv

#endif  // HPV_LINEAR_SYSTEMS_HPP
