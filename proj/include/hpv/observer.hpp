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
/// \file observer.hpp
///
/// One predictor per subsystem on its reduced model:
///
///   xh_i(k+1) = Ar_i xh_i(k) + Br_i q(k) + K_i (y_i(k) - Cr_i xh_i(k))
///
/// with K_i from the steady-state predictor Riccati equation. y_i and q are
/// deviations from the steady state.
///
#ifndef HPV_OBSERVER_HPP
#define HPV_OBSERVER_HPP

#include <vector>

#include "hpv/hpv_model.hpp"

namespace hpv {

struct LocalObserver {
  Matrix A, B, C;  // reduced model
  Matrix K;        // predictor gain, A P C' S^-1
  Matrix M;        // filter gain, P C' S^-1
  Vector x_hat;    // prediction of xr(k) given y up to k-1
  double error_radius = 0.0;  // spectral radius of A - K C
};

struct ObserverBank {
  std::vector<LocalObserver> local;

  int size() const { return static_cast<int>(local.size()); }
};

/// Designs gains for the given covariances (one pair per subsystem). Throws
/// std::domain_error if a pair is not detectable.
ObserverBank design_gains(const std::vector<Matrix>& a,
                          const std::vector<Matrix>& b,
                          const std::vector<Matrix>& c,
                          const std::vector<Matrix>& process_cov,
                          const std::vector<Matrix>& meas_cov);

/// Covariances from bounded uniform noise: process noise of magnitude
/// rel_process * |x_ss| on every full state, mapped by T_i, and measurement
/// noise of magnitude meas_bound on every output.
ObserverBank design_model_observer(const HpvModel& model, double rel_process,
                                   double meas_bound);

/// Advances every estimate by one sample. q holds all model inputs, y the
/// stacked outputs of all subsystems (deviation). Throws
/// std::invalid_argument on a dimension mismatch.
void observer_step(ObserverBank& bank, const Vector& q, const Vector& y);

/// Current estimate xr_i(k | k) = xh_i + M_i (y_i - Cr_i xh_i).
std::vector<Vector> filtered_estimates(const ObserverBank& bank, const Vector& y);

}  // namespace hpv

#endif  // HPV_OBSERVER_HPP
