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

#include "hpv/observer.hpp"

#include <stdexcept>

#include "hpv/linear_systems.hpp"

namespace hpv {

ObserverBank design_gains(const std::vector<Matrix>& a,
                          const std::vector<Matrix>& b,
                          const std::vector<Matrix>& c,
                          const std::vector<Matrix>& process_cov,
                          const std::vector<Matrix>& meas_cov) {
  const std::size_t m = a.size();
  if (b.size() != m || c.size() != m || process_cov.size() != m ||
      meas_cov.size() != m) {
    throw std::invalid_argument("observer design: list lengths differ");
  }
  ObserverBank bank;
  for (std::size_t i = 0; i < m; ++i) {
    LocalObserver o;
    o.A = a[i];
    o.B = b[i];
    o.C = c[i];
    const RiccatiResult ric =
        predictor_riccati(a[i], c[i], process_cov[i], meas_cov[i]);
    o.K = ric.K;
    const Matrix s = c[i] * ric.P * c[i].transpose() + meas_cov[i];
    o.M = ric.P * c[i].transpose() * s.inverse();
    o.error_radius = spectral_radius(a[i] - o.K * c[i]);
    if (!(o.error_radius < 1.0)) {
      throw std::domain_error("observer error dynamics are not stable");
    }
    o.x_hat = Vector::Zero(a[i].rows());
    bank.local.push_back(std::move(o));
  }
  return bank;
}

ObserverBank design_model_observer(const HpvModel& model, double rel_process,
                                   double meas_bound) {
  std::vector<Matrix> a, b, c, qs, rs;
  for (const auto& s : model.subsystems) {
    const Vector var =
        (rel_process * s.x_ss.cwiseAbs()).array().square() / 3.0;
    Matrix q = s.T * var.asDiagonal() * s.T.transpose();
    // Keeps the covariance definite when x_ss has zero entries.
    q += 1e-12 * Matrix::Identity(q.rows(), q.cols());
    a.push_back(s.Ar);
    b.push_back(s.Br);
    c.push_back(s.Cr);
    qs.push_back(q);
    rs.push_back(Matrix::Identity(s.Cr.rows(), s.Cr.rows()) * meas_bound *
                 meas_bound / 3.0);
  }
  return design_gains(a, b, c, qs, rs);
}

void observer_step(ObserverBank& bank, const Vector& q, const Vector& y) {
  Eigen::Index off = 0;
  for (auto& o : bank.local) {
    if (q.size() != o.B.cols()) {
      throw std::invalid_argument("observer_step: input length mismatch");
    }
    const Eigen::Index ny = o.C.rows();
    if (off + ny > y.size()) {
      throw std::invalid_argument("observer_step: output length mismatch");
    }
    const Vector innov = y.segment(off, ny) - o.C * o.x_hat;
    o.x_hat = o.A * o.x_hat + o.B * q + o.K * innov;
    off += ny;
  }
  if (off != y.size()) {
    throw std::invalid_argument("observer_step: output length mismatch");
  }
}

std::vector<Vector> filtered_estimates(const ObserverBank& bank,
                                       const Vector& y) {
  std::vector<Vector> out;
  Eigen::Index off = 0;
  for (const auto& o : bank.local) {
    const Eigen::Index ny = o.C.rows();
    out.push_back(o.x_hat + o.M * (y.segment(off, ny) - o.C * o.x_hat));
    off += ny;
  }
  return out;
}

}  // namespace hpv
