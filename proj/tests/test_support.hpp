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

// Seeded instance generators and dense oracles shared by the test binaries.
// Everything here is written against the dense problem data only, so it does
// not reuse the library code paths it is checking.

#ifndef HPV_TESTS_TEST_SUPPORT_HPP
#define HPV_TESTS_TEST_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hpv/bnb.hpp"
#include "hpv/problem_core.hpp"

namespace hpv::testing {

// xorshift64*; deliberately not the simulator's generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed * 0x9E3779B97F4A7C15ULL + 1) {}
  std::uint64_t next() {
    s_ ^= s_ >> 12;
    s_ ^= s_ << 25;
    s_ ^= s_ >> 27;
    return s_ * 0x2545F4914F6CDD1DULL;
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  Matrix matrix(int r, int c, double scale = 1.0) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = uniform(-scale, scale);
    return m;
  }
  Vector vector(int n, double scale = 1.0) { return matrix(n, 1, scale).col(0); }

 private:
  std::uint64_t s_;
};

struct RandomQpSpec {
  int min_subsystems = 2;
  int max_subsystems = 8;
  int min_size = 3;
  int max_size = 12;
  int max_total = 300;
  bool equalities = true;
  bool inequalities = true;
  bool onenorm = true;
  bool pairs = false;  // one virtual flow pair in some subsystems
  double gamma = 1.0;
};

struct RandomQp {
  PartitionedQP qp;
  std::vector<VirtualFlowPair> pairs;
  Vector feasible_point;
};

// Feasible by construction: b = A x0 and d = C x0 + positive slack. Couplings
// follow a chain plus a few random extra links.
inline RandomQp random_qp(std::uint64_t seed, const RandomQpSpec& spec = {}) {
  Rng rng(seed);
  RandomQp out;
  const int m = rng.integer(spec.min_subsystems, spec.max_subsystems);
  std::vector<int> sizes(m);
  int budget = spec.max_total;
  for (int i = 0; i < m; ++i) {
    const int left = m - i - 1;
    const int hi = std::min(spec.max_size, budget - left * spec.min_size);
    sizes[i] = rng.integer(spec.min_size, std::max(spec.min_size, hi));
    budget -= sizes[i];
  }
  PartitionedQP& qp = out.qp;
  qp = PartitionedQP::with_partition(sizes, spec.gamma);
  std::vector<std::vector<int>> links(m);
  for (int i = 0; i < m; ++i) {
    if (i + 1 < m) links[i].push_back(i + 1);
    if (m > 2 && rng.uniform() < 0.3) {
      const int j = rng.integer(0, m - 1);
      if (j != i && j != i + 1) links[i].push_back(j);
    }
  }
  for (int i = 0; i < m; ++i) {
    const int n = sizes[i];
    const Matrix b = rng.matrix(n, n);
    qp.quad_blocks[i] = b * b.transpose() + 0.5 * n * Matrix::Identity(n, n);
    qp.lin_cost[i] = rng.vector(n, 2.0);
  }
  if (spec.pairs) {
    for (int i = 0; i < m; ++i) {
      if (rng.uniform() < 0.5) continue;
      VirtualFlowPair p;
      p.subsystem = i;
      p.turbine_var = 0;
      p.pump_var = 1;
      p.r_turbine = rng.uniform(0.5, 2.0);
      p.r_pump = rng.uniform(0.5, 2.0);
      p.alpha = 0.9;
      Matrix& h = qp.quad_blocks[i];
      h.row(0).setZero();
      h.row(1).setZero();
      h.col(0).setZero();
      h.col(1).setZero();
      h.topLeftCorner(2, 2) = build_relaxed_cost(p.r_turbine, p.r_pump, p.alpha);
      // Both directions profitable on their own, so the relaxation is tempted.
      qp.lin_cost[i](0) = -rng.uniform(2.0, 4.0);
      qp.lin_cost[i](1) = -rng.uniform(2.0, 4.0);
      out.pairs.push_back(p);
    }
  }
  std::vector<Vector> x0(m);
  for (int i = 0; i < m; ++i) x0[i] = rng.vector(sizes[i]);
  for (const auto& p : out.pairs) {
    x0[p.subsystem](p.turbine_var) = rng.uniform(0.1, 1.0);
    x0[p.subsystem](p.pump_var) = 0.0;
  }
  out.feasible_point = stack(x0);

  auto add_rows = [&](BlockMap& blocks, std::vector<Vector>& rhs, int i,
                      int rows, bool inequality) {
    if (rows <= 0) return;
    Vector r = Vector::Zero(rows);
    std::vector<int> cols{i};
    for (int j : links[i]) cols.push_back(j);
    for (int j = 0; j < i; ++j) {
      if (std::find(links[j].begin(), links[j].end(), i) != links[j].end()) {
        cols.push_back(j);
      }
    }
    for (int j : cols) {
      Matrix blk = rng.matrix(rows, sizes[j]);
      r += blk * x0[j];
      blocks[{i, j}] = blk;
    }
    if (inequality) {
      for (int k = 0; k < rows; ++k) r(k) += rng.uniform(0.0, 1.0);
    }
    rhs[i] = r;
  };
  for (int i = 0; i < m; ++i) {
    if (spec.equalities) {
      add_rows(qp.eq_blocks, qp.eq_rhs, i, rng.integer(0, sizes[i] / 3), false);
    }
    if (spec.inequalities) {
      add_rows(qp.ineq_blocks, qp.ineq_rhs, i, rng.integer(1, sizes[i] / 2),
               true);
    }
    if (spec.onenorm) {
      add_rows(qp.onenorm_blocks, qp.onenorm_offset, i, rng.integer(0, 2),
               false);
      // Shift the 1-norm targets away from x0 so the penalty is active.
      if (qp.onenorm_offset[i].size() > 0) {
        qp.onenorm_offset[i] += rng.vector(qp.onenorm_offset[i].size(), 0.5);
      }
    }
  }
  // Nonnegative pair flows.
  for (const auto& p : out.pairs) {
    const int i = p.subsystem;
    const int old = static_cast<int>(qp.ineq_rhs[i].size());
    Matrix blk = Matrix::Zero(old + 2, sizes[i]);
    if (qp.ineq_blocks.count({i, i})) blk.topRows(old) = qp.ineq_blocks[{i, i}];
    blk(old, p.turbine_var) = -1.0;
    blk(old + 1, p.pump_var) = -1.0;
    for (auto& [key, b] : qp.ineq_blocks) {
      if (key.first == i && key.second != i) {
        Matrix grown = Matrix::Zero(old + 2, b.cols());
        grown.topRows(old) = b;
        b = grown;
      }
    }
    qp.ineq_blocks[{i, i}] = blk;
    Vector rhs(old + 2);
    rhs << qp.ineq_rhs[i], 0.0, 0.0;
    qp.ineq_rhs[i] = rhs;
  }
  return out;
}

// Dense problem data, assembled here rather than through the library.
struct DenseQp {
  Matrix H, A, C, P;
  Vector g, b, d, p;
  double gamma = 1.0;
};

inline Matrix dense_blocks(const BlockMap& blocks, const std::vector<int>& part,
                           const std::vector<Vector>& rhs) {
  std::vector<int> roff(part.size() + 1, 0), coff(part.size() + 1, 0);
  for (std::size_t i = 0; i < part.size(); ++i) {
    roff[i + 1] = roff[i] + static_cast<int>(rhs[i].size());
    coff[i + 1] = coff[i] + part[i];
  }
  Matrix m = Matrix::Zero(roff.back(), coff.back());
  for (const auto& [key, blk] : blocks) {
    m.block(roff[key.first], coff[key.second], blk.rows(), blk.cols()) = blk;
  }
  return m;
}

inline Vector dense_stack(const std::vector<Vector>& parts) {
  int n = 0;
  for (const auto& v : parts) n += static_cast<int>(v.size());
  Vector out(n);
  int off = 0;
  for (const auto& v : parts) {
    out.segment(off, v.size()) = v;
    off += static_cast<int>(v.size());
  }
  return out;
}

inline DenseQp densify(const PartitionedQP& qp) {
  DenseQp d;
  int n = 0;
  for (int s : qp.partition) n += s;
  d.H = Matrix::Zero(n, n);
  int off = 0;
  for (std::size_t i = 0; i < qp.partition.size(); ++i) {
    d.H.block(off, off, qp.partition[i], qp.partition[i]) = qp.quad_blocks[i];
    off += qp.partition[i];
  }
  d.g = dense_stack(qp.lin_cost);
  d.A = dense_blocks(qp.eq_blocks, qp.partition, qp.eq_rhs);
  d.C = dense_blocks(qp.ineq_blocks, qp.partition, qp.ineq_rhs);
  d.P = dense_blocks(qp.onenorm_blocks, qp.partition, qp.onenorm_offset);
  d.b = dense_stack(qp.eq_rhs);
  d.d = dense_stack(qp.ineq_rhs);
  d.p = dense_stack(qp.onenorm_offset);
  d.gamma = qp.gamma;
  return d;
}

// Relative KKT residuals of (x, duals). Each field is divided by the size of
// the data it is measured against, so 1e-3 means three correct digits.
struct ScaledKkt {
  double stationarity = 0.0;
  double eq = 0.0;
  double ineq = 0.0;
  double slackness = 0.0;
  double onenorm = 0.0;
  double max() const { return std::max({stationarity, eq, ineq, slackness, onenorm}); }
};

inline double inf_norm(const Vector& v) {
  return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

inline ScaledKkt scaled_kkt(const DenseQp& q, const Vector& x,
                            const Vector& lambda, const Vector& mu,
                            const Vector& nu) {
  ScaledKkt k;
  const Vector hx = q.H * x;
  Vector grad = hx + q.g;
  if (q.A.rows()) grad += q.A.transpose() * lambda;
  if (q.C.rows()) grad += q.C.transpose() * mu;
  if (q.P.rows()) grad += q.P.transpose() * nu;
  k.stationarity = inf_norm(grad) / std::max({1.0, inf_norm(hx), inf_norm(q.g)});
  if (q.A.rows()) {
    const Vector ax = q.A * x;
    k.eq = inf_norm(ax - q.b) / std::max({1.0, inf_norm(ax), inf_norm(q.b)});
  }
  if (q.C.rows()) {
    const Vector cx = q.C * x;
    const double scale = std::max({1.0, inf_norm(cx), inf_norm(q.d)});
    const Vector s = cx - q.d;
    k.ineq = s.cwiseMax(0.0).maxCoeff() / scale;
    const double mu_scale = std::max(1.0, inf_norm(mu));
    for (Eigen::Index r = 0; r < s.size(); ++r) {
      k.slackness = std::max({k.slackness, std::abs(mu(r) * s(r)) / (scale * mu_scale),
                              std::max(0.0, -mu(r)) / mu_scale});
    }
  }
  if (q.P.rows()) {
    const Vector xa = q.P * x - q.p;
    const double scale = std::max(1.0, inf_norm(xa)) * std::max(1.0, q.gamma);
    for (Eigen::Index r = 0; r < xa.size(); ++r) {
      const double gap = std::max(q.gamma * std::abs(xa(r)) - nu(r) * xa(r),
                                  std::abs(nu(r)) - q.gamma);
      k.onenorm = std::max(k.onenorm, gap / scale);
    }
  }
  return k;
}

// Exact minimizer of an equality-constrained QP via its KKT system.
inline Vector eq_qp_solution(const DenseQp& q) {
  const Eigen::Index n = q.H.rows(), m = q.A.rows();
  Matrix kkt = Matrix::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = q.H;
  kkt.topRightCorner(n, m) = q.A.transpose();
  kkt.bottomLeftCorner(m, n) = q.A;
  Vector rhs(n + m);
  rhs << -q.g, q.b;
  return kkt.fullPivLu().solve(rhs).head(n);
}

}  // namespace hpv::testing

#endif  // HPV_TESTS_TEST_SUPPORT_HPP
