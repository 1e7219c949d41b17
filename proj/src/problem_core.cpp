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

#include "hpv/problem_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace hpv {
namespace {

constexpr int kDenseEigenLimit = 500;
constexpr double kPowerIterationTol = 1e-10;
// Past this many steps the top eigenvalues are too close for power iteration
// to settle cheaply; the dense solver takes over.
constexpr int kPowerIterationCap = 2000;

Matrix assemble(const BlockMap& blocks, const std::vector<Vector>& rhs,
                const std::vector<int>& partition) {
  const int m = static_cast<int>(partition.size());
  std::vector<int> row_off(m + 1, 0), col_off(m + 1, 0);
  for (int i = 0; i < m; ++i) {
    row_off[i + 1] = row_off[i] + static_cast<int>(rhs[i].size());
    col_off[i + 1] = col_off[i] + partition[i];
  }
  Matrix out = Matrix::Zero(row_off[m], col_off[m]);
  for (const auto& [key, blk] : blocks) {
    out.block(row_off[key.first], col_off[key.second], blk.rows(), blk.cols()) =
        blk;
  }
  return out;
}

Vector stack_all(const std::vector<Vector>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vector out(n);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.segment(off, p.size()) = p;
    off += p.size();
  }
  return out;
}

std::string block_name(char family, int i, int j) {
  std::ostringstream os;
  os << family << '_' << i + 1 << j + 1;
  return os.str();
}

// Adds M_ij' * y_i for every block (i, j) into v_j.
void add_transposed(const BlockMap& blocks, const std::vector<Vector>& y,
                    std::vector<Vector>& v) {
  for (const auto& [key, blk] : blocks) {
    v[key.second].noalias() += blk.transpose() * y[key.first];
  }
}

// Computes (M x)_i - rhs_i for every row owner i.
std::vector<Vector> row_residuals(const PartitionedQP& qp,
                                  const BlockMap& blocks,
                                  const std::vector<Vector>& rhs,
                                  const Vector& x) {
  std::vector<Vector> out;
  out.reserve(rhs.size());
  for (const auto& r : rhs) out.push_back(-r);
  for (const auto& [key, blk] : blocks) {
    out[key.first].noalias() +=
        blk * x.segment(qp.var_offset(key.second), blk.cols());
  }
  return out;
}

}  // namespace

bool is_nonzero_block(const Matrix& m) {
  return m.size() > 0 && (m.array() != 0.0).any();
}

int PartitionedQP::num_vars() const {
  return std::accumulate(partition.begin(), partition.end(), 0);
}

int PartitionedQP::num_eq() const {
  int n = 0;
  for (const auto& b : eq_rhs) n += static_cast<int>(b.size());
  return n;
}

int PartitionedQP::num_ineq() const {
  int n = 0;
  for (const auto& d : ineq_rhs) n += static_cast<int>(d.size());
  return n;
}

int PartitionedQP::num_onenorm() const {
  int n = 0;
  for (const auto& p : onenorm_offset) n += static_cast<int>(p.size());
  return n;
}

int PartitionedQP::var_offset(int i) const {
  return std::accumulate(partition.begin(), partition.begin() + i, 0);
}

Matrix PartitionedQP::dense_hessian() const {
  const int n = num_vars();
  Matrix h = Matrix::Zero(n, n);
  int off = 0;
  for (int i = 0; i < num_subsystems(); ++i) {
    h.block(off, off, partition[i], partition[i]) = quad_blocks[i];
    off += partition[i];
  }
  return h;
}

Vector PartitionedQP::stacked_lin_cost() const { return stack_all(lin_cost); }
Matrix PartitionedQP::dense_eq() const {
  return assemble(eq_blocks, eq_rhs, partition);
}
Matrix PartitionedQP::dense_ineq() const {
  return assemble(ineq_blocks, ineq_rhs, partition);
}
Matrix PartitionedQP::dense_onenorm() const {
  return assemble(onenorm_blocks, onenorm_offset, partition);
}
Vector PartitionedQP::stacked_eq_rhs() const { return stack_all(eq_rhs); }
Vector PartitionedQP::stacked_ineq_rhs() const { return stack_all(ineq_rhs); }
Vector PartitionedQP::stacked_onenorm_offset() const {
  return stack_all(onenorm_offset);
}

PartitionedQP PartitionedQP::with_partition(const std::vector<int>& sizes,
                                            double gamma) {
  PartitionedQP qp;
  qp.partition = sizes;
  qp.gamma = gamma;
  for (int n : sizes) {
    qp.quad_blocks.push_back(Matrix::Identity(n, n));
    qp.lin_cost.push_back(Vector::Zero(n));
    qp.eq_rhs.emplace_back(0);
    qp.ineq_rhs.emplace_back(0);
    qp.onenorm_offset.emplace_back(0);
  }
  return qp;
}

DualPoint DualPoint::zeros(const PartitionedQP& qp) {
  DualPoint dp;
  for (int i = 0; i < qp.num_subsystems(); ++i) {
    dp.lambda.push_back(Vector::Zero(qp.eq_rows(i)));
    dp.mu.push_back(Vector::Zero(qp.ineq_rows(i)));
    dp.nu.push_back(Vector::Zero(qp.onenorm_rows(i)));
  }
  return dp;
}

Vector DualPoint::stacked_lambda() const { return stack_all(lambda); }
Vector DualPoint::stacked_mu() const { return stack_all(mu); }
Vector DualPoint::stacked_nu() const { return stack_all(nu); }

double KktReport::max() const {
  return std::max({stationarity_residual, eq_violation, ineq_violation,
                   complementary_slackness_gap, onenorm_subgradient_gap});
}

ValidationReport validate_problem(const PartitionedQP& qp) {
  ValidationReport report;
  auto& v = report.violations;
  const int m = qp.num_subsystems();
  if (m == 0) {
    v.push_back("empty partition");
    return report;
  }
  if (static_cast<int>(qp.quad_blocks.size()) != m ||
      static_cast<int>(qp.lin_cost.size()) != m ||
      static_cast<int>(qp.eq_rhs.size()) != m ||
      static_cast<int>(qp.ineq_rhs.size()) != m ||
      static_cast<int>(qp.onenorm_offset.size()) != m) {
    v.push_back("per-subsystem arrays do not match partition length");
    return report;
  }
  if (!(qp.gamma > 0.0) || !std::isfinite(qp.gamma)) {
    v.push_back("gamma must be positive");
  }
  for (int i = 0; i < m; ++i) {
    const int n = qp.partition[i];
    const std::string tag = std::to_string(i + 1);
    if (n <= 0) {
      v.push_back("subsystem " + tag + " has nonpositive size");
      continue;
    }
    const Matrix& h = qp.quad_blocks[i];
    if (h.rows() != n || h.cols() != n) {
      v.push_back("H_" + tag + " has wrong dimensions");
    } else if (!h.allFinite()) {
      v.push_back("H_" + tag + " has non-finite entries");
    } else {
      const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
      if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        v.push_back("H_" + tag + " not symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() > 0.0)) {
        v.push_back("H_" + tag + " not positive definite");
      }
    }
    if (qp.lin_cost[i].size() != n) {
      v.push_back("g_" + tag + " has wrong length");
    }
  }

  auto check_family = [&](char family, const BlockMap& blocks,
                          const std::vector<Vector>& rhs) {
    for (const auto& [key, blk] : blocks) {
      const auto [i, j] = key;
      if (i < 0 || i >= m || j < 0 || j >= m) {
        v.push_back("block " + std::string(1, family) + " index out of range");
        continue;
      }
      if (blk.rows() != rhs[i].size() || blk.cols() != qp.partition[j]) {
        v.push_back(block_name(family, i, j) + " has wrong dimensions");
      }
      if (!blk.allFinite()) {
        v.push_back(block_name(family, i, j) + " has non-finite entries");
      }
    }
    for (int i = 0; i < m; ++i) {
      if (!rhs[i].allFinite()) {
        v.push_back(std::string(1, family) + " right-hand side of subsystem " +
                    std::to_string(i + 1) + " is not finite");
      }
      if (rhs[i].size() == 0) continue;
      auto it = blocks.find({i, i});
      if (it == blocks.end()) {
        v.push_back("diagonal block " + block_name(family, i, i) + " missing");
      } else if (!is_nonzero_block(it->second)) {
        v.push_back("diagonal block " + block_name(family, i, i) + " is zero");
      }
    }
  };
  check_family('A', qp.eq_blocks, qp.eq_rhs);
  check_family('C', qp.ineq_blocks, qp.ineq_rhs);
  check_family('P', qp.onenorm_blocks, qp.onenorm_offset);
  return report;
}

Neighborhoods compute_neighborhoods(const PartitionedQP& qp) {
  const int m = qp.num_subsystems();
  Neighborhoods nb(m);
  for (int i = 0; i < m; ++i) nb[i].insert(i);
  for (const BlockMap* blocks :
       {&qp.eq_blocks, &qp.ineq_blocks, &qp.onenorm_blocks}) {
    for (const auto& [key, blk] : *blocks) {
      if (!is_nonzero_block(blk)) continue;
      nb[key.first].insert(key.second);
      nb[key.second].insert(key.first);
    }
  }
  return nb;
}

double lipschitz_constant(const PartitionedQP& qp) {
  const int m = qp.num_subsystems();
  // W = G L^-T with H = L L', so that G H^-1 G' = W W'.
  Matrix g_stack(qp.num_eq() + qp.num_ineq() + qp.num_onenorm(), qp.num_vars());
  g_stack << qp.dense_eq(), qp.dense_ineq(), qp.dense_onenorm();
  if (g_stack.rows() == 0) return 0.0;

  Matrix w(g_stack.rows(), g_stack.cols());
  for (int i = 0, off = 0; i < m; ++i) {
    const int n = qp.partition[i];
    Eigen::LLT<Matrix> llt(qp.quad_blocks[i]);
    if (llt.info() != Eigen::Success) {
      throw std::domain_error("H_" + std::to_string(i + 1) +
                              " is not positive definite");
    }
    Matrix lt = llt.matrixU();  // L'
    // W_block = G_block L^-T  <=>  W_block L' = G_block.
    w.middleCols(off, n) =
        lt.transpose()
            .triangularView<Eigen::Lower>()
            .solve(g_stack.middleCols(off, n).transpose())
            .transpose();
    off += n;
  }

  auto dense = [&w] {
    Matrix gram = (w.rows() <= w.cols()) ? Matrix(w * w.transpose())
                                         : Matrix(w.transpose() * w);
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff());
  };
  const Eigen::Index dim = std::min(w.rows(), w.cols());
  if (dim <= kDenseEigenLimit) return dense();

  // Symmetric power iteration on W'W from the normalized all-ones vector.
  Vector v = Vector::Ones(w.cols()) / std::sqrt(static_cast<double>(w.cols()));
  double estimate = 0.0;
  for (int it = 0; it < kPowerIterationCap; ++it) {
    Vector next = w.transpose() * (w * v);
    const double rq = v.dot(next);
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    v = next / norm;
    if (it > 0 && std::abs(rq - estimate) <= kPowerIterationTol * rq) {
      return rq;
    }
    estimate = rq;
  }
  return dense();
}

Vector lagrangian_minimizer(const PartitionedQP& qp, const DualPoint& dp) {
  const int m = qp.num_subsystems();
  std::vector<Vector> v(qp.lin_cost);
  add_transposed(qp.eq_blocks, dp.lambda, v);
  add_transposed(qp.ineq_blocks, dp.mu, v);
  add_transposed(qp.onenorm_blocks, dp.nu, v);
  std::vector<Vector> x(m);
  for (int i = 0; i < m; ++i) {
    x[i] = -qp.quad_blocks[i].llt().solve(v[i]);
  }
  return stack_all(x);
}

double dual_value(const PartitionedQP& qp, const DualPoint& dp) {
  const int m = qp.num_subsystems();
  if (static_cast<int>(dp.lambda.size()) != m ||
      static_cast<int>(dp.mu.size()) != m ||
      static_cast<int>(dp.nu.size()) != m) {
    throw std::invalid_argument("dual point does not match partition");
  }
  for (int i = 0; i < m; ++i) {
    if (dp.lambda[i].size() != qp.eq_rows(i) ||
        dp.mu[i].size() != qp.ineq_rows(i) ||
        dp.nu[i].size() != qp.onenorm_rows(i)) {
      throw std::invalid_argument("dual block size mismatch in subsystem " +
                                  std::to_string(i + 1));
    }
  }
  std::vector<Vector> v(qp.lin_cost);
  add_transposed(qp.eq_blocks, dp.lambda, v);
  add_transposed(qp.ineq_blocks, dp.mu, v);
  add_transposed(qp.onenorm_blocks, dp.nu, v);
  double f = 0.0;
  for (int i = 0; i < m; ++i) {
    f += 0.5 * v[i].dot(qp.quad_blocks[i].llt().solve(v[i]));
    f += qp.eq_rhs[i].dot(dp.lambda[i]);
    f += qp.ineq_rhs[i].dot(dp.mu[i]);
    f += qp.onenorm_offset[i].dot(dp.nu[i]);
  }
  return f;
}

double primal_objective(const PartitionedQP& qp, const Vector& x) {
  double obj = 0.0;
  for (int i = 0; i < qp.num_subsystems(); ++i) {
    const Vector xi = subsystem_slice(qp, x, i);
    obj += 0.5 * xi.dot(qp.quad_blocks[i] * xi) + qp.lin_cost[i].dot(xi);
  }
  for (const auto& r : row_residuals(qp, qp.onenorm_blocks, qp.onenorm_offset, x)) {
    obj += qp.gamma * r.lpNorm<1>();
  }
  return obj;
}

KktReport kkt_residuals(const PartitionedQP& qp, const Vector& x,
                        const Vector& x_aux, const DualPoint& dp) {
  const int m = qp.num_subsystems();
  KktReport rep;

  std::vector<Vector> grad(m);
  for (int i = 0; i < m; ++i) {
    grad[i] = qp.quad_blocks[i] * subsystem_slice(qp, x, i) + qp.lin_cost[i];
  }
  add_transposed(qp.eq_blocks, dp.lambda, grad);
  add_transposed(qp.ineq_blocks, dp.mu, grad);
  add_transposed(qp.onenorm_blocks, dp.nu, grad);
  for (const auto& gi : grad) {
    if (gi.size() > 0) {
      rep.stationarity_residual =
          std::max(rep.stationarity_residual, gi.lpNorm<Eigen::Infinity>());
    }
  }

  for (const auto& r : row_residuals(qp, qp.eq_blocks, qp.eq_rhs, x)) {
    if (r.size() > 0) {
      rep.eq_violation = std::max(rep.eq_violation, r.lpNorm<Eigen::Infinity>());
    }
  }

  const auto slack = row_residuals(qp, qp.ineq_blocks, qp.ineq_rhs, x);
  for (int i = 0; i < m; ++i) {
    for (Eigen::Index r = 0; r < slack[i].size(); ++r) {
      const double s = slack[i][r];
      const double mu = dp.mu[i][r];
      rep.ineq_violation = std::max(rep.ineq_violation, std::max(0.0, s));
      rep.complementary_slackness_gap =
          std::max({rep.complementary_slackness_gap, std::abs(mu * s),
                    std::max(0.0, -mu)});
    }
  }

  // For |nu| <= gamma the term gamma|x_a| - nu x_a is nonnegative and vanishes
  // exactly when nu is a subgradient of gamma|.| at x_a.
  const auto pres = row_residuals(qp, qp.onenorm_blocks, qp.onenorm_offset, x);
  const Vector stacked_pres = stack_all(pres);
  const Vector nu = dp.stacked_nu();
  if (x_aux.size() != stacked_pres.size()) {
    throw std::invalid_argument("x_aux length does not match 1-norm rows");
  }
  for (Eigen::Index r = 0; r < nu.size(); ++r) {
    const double xa = x_aux[r];
    const double gap = std::max(
        {qp.gamma * std::abs(xa) - nu[r] * xa, std::abs(nu[r]) - qp.gamma,
         std::abs(xa - stacked_pres[r])});
    rep.onenorm_subgradient_gap = std::max(rep.onenorm_subgradient_gap, gap);
  }
  return rep;
}

Vector subsystem_slice(const PartitionedQP& qp, const Vector& x, int i) {
  return x.segment(qp.var_offset(i), qp.partition[i]);
}

Vector stack(const std::vector<Vector>& parts) { return stack_all(parts); }

}  // namespace hpv
