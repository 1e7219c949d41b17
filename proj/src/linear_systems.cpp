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

#include "hpv/linear_systems.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

namespace hpv {
namespace {

// Osborne balancing with powers of two, so the similarity itself is exact.
// Returns d with D^-1 A D balanced, D = diag(d).
Vector balancing_scales(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Vector d = Vector::Ones(n);
  Matrix m = a;
  bool changed = true;
  for (int sweep = 0; changed && sweep < 100; ++sweep) {
    changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = m.col(i).cwiseAbs().sum() - std::abs(m(i, i));
      const double r = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      double cc = c, rr = r;
      while (cc < rr / 2.0) {
        cc *= 2.0;
        rr /= 2.0;
        f *= 2.0;
      }
      while (cc >= rr * 2.0) {
        cc /= 2.0;
        rr *= 2.0;
        f /= 2.0;
      }
      if ((c + r) * 0.95 > cc + rr) {
        changed = true;
        d[i] *= f;
        m.col(i) *= f;
        m.row(i) /= f;
      }
    }
  }
  return d;
}

Matrix null_space_right(const Matrix& m, double tol) {
  if (m.cols() == 0) return Matrix(0, 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double thresh = tol * std::max(1.0, s.size() > 0 ? s[0] : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > thresh) ++rank;
  }
  return svd.matrixV().rightCols(m.cols() - rank);
}

}  // namespace

std::pair<Matrix, Matrix> zoh_discretize(const Matrix& a, const Matrix& b,
                                         double ts) {
  if (!(ts > 0.0)) throw std::invalid_argument("sampling time must be > 0");
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw std::invalid_argument("zoh: dimension mismatch");
  }
  const Eigen::Index n = a.rows(), m = b.cols();
  const Vector d = balancing_scales(a);
  const Vector d_inv = d.cwiseInverse();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = d_inv.asDiagonal() * a * d.asDiagonal() * ts;
  aug.topRightCorner(n, m) = d_inv.asDiagonal() * b * ts;
  const Matrix e = aug.exp();
  Matrix ad = d.asDiagonal() * e.topLeftCorner(n, n) * d_inv.asDiagonal();
  Matrix bd = d.asDiagonal() * e.topRightCorner(n, m);
  return {ad, bd};
}

double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix discrete_lyapunov(const Matrix& a, const Matrix& q) {
  if (a.size() == 0) return Matrix(0, 0);
  if (!(spectral_radius(a) < 1.0)) {
    throw std::domain_error("discrete Lyapunov equation needs a stable matrix");
  }
  Matrix x = q;
  Matrix ak = a;
  for (int it = 0; it < 64; ++it) {
    const Matrix step = ak * x * ak.transpose();
    x += step;
    ak = ak * ak;
    if (step.norm() <= 1e-16 * x.norm() || ak.norm() < 1e-300) break;
  }
  return 0.5 * (x + x.transpose());
}

Matrix psd_factor(const Matrix& m) {
  if (m.size() == 0) return Matrix(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  const Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

UnitModeSplit split_unit_modes(const Matrix& a, double tol) {
  const Eigen::Index n = a.rows();
  const Matrix shifted = a - Matrix::Identity(n, n);
  UnitModeSplit s;
  s.V = null_space_right(shifted, tol);
  const Matrix w = null_space_right(shifted.transpose(), tol);
  if (s.V.cols() != w.cols()) {
    throw std::domain_error("eigenvalue one is defective");
  }
  s.unit_modes = static_cast<int>(s.V.cols());
  if (s.unit_modes == 0) {
    s.U = Matrix::Identity(n, n);
    s.T = s.U;
    s.T_inv = s.U;
    return s;
  }
  // U spans the orthogonal complement of the left eigenvectors, so W'U = 0.
  s.U = null_space_right(w.transpose(), tol);
  const Matrix wv = w.transpose() * s.V;
  const Matrix top = wv.partialPivLu().solve(w.transpose());
  const Matrix proj = s.V * top;
  s.T.resize(n, n);
  s.T << top, s.U.transpose() * (Matrix::Identity(n, n) - proj);
  s.T_inv.resize(n, n);
  s.T_inv << s.V, s.U;
  return s;
}

namespace {

struct StablePart {
  UnitModeSplit split;
  Matrix Ts;  // maps x to the stable coordinates
  Matrix As, Bs, Cs;
  Vector hsv;
  Matrix Lc, Lo, Usvd, Vsvd;
};

StablePart analyze(const Matrix& a, const Matrix& b, const Matrix& c) {
  StablePart p;
  p.split = split_unit_modes(a);
  const Eigen::Index n = a.rows();
  const Eigen::Index ns = n - p.split.unit_modes;
  p.Ts = p.split.T.bottomRows(ns);
  p.As = p.Ts * a * p.split.U;
  p.Bs = p.Ts * b;
  p.Cs = c * p.split.U;
  if (ns == 0) {
    p.hsv = Vector(0);
    return p;
  }
  if (!(spectral_radius(p.As) < 1.0)) {
    throw std::domain_error(
        "system has unstable modes besides eigenvalue one");
  }
  const Matrix gc = discrete_lyapunov(p.As, p.Bs * p.Bs.transpose());
  const Matrix go = discrete_lyapunov(p.As.transpose(), p.Cs.transpose() * p.Cs);
  p.Lc = psd_factor(gc);
  p.Lo = psd_factor(go);
  Eigen::JacobiSVD<Matrix> svd(p.Lo.transpose() * p.Lc,
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  p.hsv = svd.singularValues();
  p.Usvd = svd.matrixU();
  p.Vsvd = svd.matrixV();
  return p;
}

int significant(const Vector& hsv, double tol) {
  if (hsv.size() == 0 || hsv[0] <= 0.0) return 0;
  int k = 0;
  for (Eigen::Index i = 0; i < hsv.size(); ++i) {
    if (hsv[i] > tol * hsv[0]) ++k;
  }
  return k;
}

}  // namespace

int minimal_order(const Matrix& a, const Matrix& b, const Matrix& c,
                  double hsv_tol) {
  const StablePart p = analyze(a, b, c);
  return p.split.unit_modes + significant(p.hsv, hsv_tol);
}

BalancedReduction balanced_truncation(const Matrix& a, const Matrix& b,
                                      const Matrix& c, int order,
                                      double hsv_tol) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || c.cols() != a.rows()) {
    throw std::invalid_argument("balanced_truncation: dimension mismatch");
  }
  const StablePart p = analyze(a, b, c);
  BalancedReduction out;
  out.unit_modes = p.split.unit_modes;
  out.hankel_singular_values = p.hsv;
  out.minimal_order = out.unit_modes + significant(p.hsv, hsv_tol);
  if (order < out.unit_modes || order < 1) {
    throw std::invalid_argument("order " + std::to_string(order) +
                                " is below the number of unit modes (" +
                                std::to_string(out.unit_modes) + ")");
  }
  if (order > out.minimal_order) {
    throw std::invalid_argument("order " + std::to_string(order) +
                                " exceeds the minimal order " +
                                std::to_string(out.minimal_order));
  }
  const int k = order - out.unit_modes;
  const Eigen::Index n = a.rows();
  out.T.resize(order, n);
  out.T_inv.resize(n, order);
  out.T.topRows(out.unit_modes) = p.split.T.topRows(out.unit_modes);
  out.T_inv.leftCols(out.unit_modes) = p.split.V;
  if (k > 0) {
    const Vector s = p.hsv.head(k).cwiseSqrt().cwiseInverse();
    const Matrix tb =
        s.asDiagonal() * p.Usvd.leftCols(k).transpose() * p.Lo.transpose();
    const Matrix tbi = p.Lc * p.Vsvd.leftCols(k) * s.asDiagonal();
    out.T.bottomRows(k) = tb * p.Ts;
    out.T_inv.rightCols(k) = p.split.U * tbi;
  }
  return out;
}

RiccatiResult predictor_riccati(const Matrix& a, const Matrix& c,
                                const Matrix& q, const Matrix& r, double tol,
                                int max_iter) {
  RiccatiResult res;
  Matrix p = q;
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix s = c * p * c.transpose() + r;
    const Matrix k = a * p * c.transpose() * s.inverse();
    Matrix next = a * p * a.transpose() + q - k * c * p * a.transpose();
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) break;
    const double diff = (next - p).norm();
    p = std::move(next);
    if (diff <= tol * std::max(1.0, p.norm())) {
      res.P = p;
      res.K = a * p * c.transpose() * (c * p * c.transpose() + r).inverse();
      res.iterations = it;
      return res;
    }
  }
  throw std::domain_error(
      "Riccati recursion did not converge; pair may be undetectable");
}

}  // namespace hpv
