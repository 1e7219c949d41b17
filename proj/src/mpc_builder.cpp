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

#include "hpv/mpc_builder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hpv {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kGlobalRef:
      return "global-ref";
    case Scheme::kLocRefStat:
      return "loc-ref-stat";
    case Scheme::kLocRefDyn:
      return "loc-ref-dyn";
    case Scheme::kDecentralized:
      return "decentralized";
  }
  return "global-ref";
}

Scheme scheme_from_string(const std::string& s) {
  for (Scheme c : {Scheme::kGlobalRef, Scheme::kLocRefStat, Scheme::kLocRefDyn,
                   Scheme::kDecentralized}) {
    if (to_string(c) == s) return c;
  }
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

int ExchangeStructure::num_links() const {
  int n = 0;
  for (const auto& m : managed) n += static_cast<int>(m.size());
  return n;
}

int ExchangeStructure::link_index(int i, int j) const {
  const auto& m = managed[i];
  auto it = std::lower_bound(m.begin(), m.end(), j);
  if (it == m.end() || *it != j) return -1;
  return static_cast<int>(it - m.begin());
}

ExchangeStructure build_exchange_structure(const Neighborhoods& nb) {
  ExchangeStructure ex;
  ex.managed.resize(nb.size());
  for (std::size_t i = 0; i < nb.size(); ++i) {
    for (int j : nb[i]) {
      if (j > static_cast<int>(i)) ex.managed[i].push_back(j);
    }
  }
  return ex;
}

namespace {

// Finds `last` with partial + last == target in floating point.
bool fit_last_share(double partial, double target, double& last) {
  last = target - partial;
  for (int it = 0; it < 64; ++it) {
    const double s = partial + last;
    if (s == target) return true;
    const double next = last + (target - s);
    last = next != last ? next
                        : std::nextafter(last, s < target ? HUGE_VAL : -HUGE_VAL);
  }
  return partial + last == target;
}

}  // namespace

Matrix static_division(const std::vector<double>& p_ref,
                       const Vector& steady_powers) {
  const double total = steady_powers.sum();
  if (total == 0.0) {
    throw std::invalid_argument("static division needs nonzero total steady power");
  }
  const int m = static_cast<int>(steady_powers.size());
  Matrix out(p_ref.size(), m);
  for (std::size_t k = 0; k < p_ref.size(); ++k) {
    for (int i = 0; i + 1 < m; ++i) {
      out(k, i) = p_ref[k] * steady_powers[i] / total;
    }
    // The last share absorbs the rounding so the left-to-right sum is exactly
    // p_ref. On a rounding tie some targets are unreachable by moving only
    // the last share; then the one before it moves by an ulp of the partial sum.
    for (int attempt = 0; attempt < 16; ++attempt) {
      double partial = 0.0;
      for (int i = 0; i + 1 < m; ++i) partial += out(k, i);
      if (fit_last_share(partial, p_ref[k], out(k, m - 1))) break;
      if (m < 2) break;
      out(k, m - 2) += std::nextafter(partial, HUGE_VAL) - partial;
    }
  }
  return out;
}

double reference_preservation_check(const ExchangeStructure& ex,
                                    const Matrix& local_refs,
                                    const std::vector<Matrix>& delta,
                                    const std::vector<double>& p_ref) {
  const int m = static_cast<int>(ex.managed.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < p_ref.size(); ++k) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      double local = local_refs(k, i);
      for (int j : ex.managed[i]) local += delta[k](i, j);
      for (int j = 0; j < m; ++j) {
        if (ex.link_index(j, i) >= 0) local -= delta[k](j, i);
      }
      total += local;
    }
    worst = std::max(worst, std::abs(total - p_ref[k]));
  }
  return worst;
}

Neighborhoods model_neighborhoods(const HpvModel& model) {
  const int m = static_cast<int>(model.subsystems.size());
  Neighborhoods nb(m);
  auto link = [&](int a, int b) {
    nb[a].insert(b);
    nb[b].insert(a);
  };
  const PowerMap pm = linearize_power(model);
  for (int i = 0; i < m; ++i) {
    nb[i].insert(i);
    const auto& s = model.subsystems[i];
    for (int u = 0; u < model.num_inputs(); ++u) {
      if (is_nonzero_block(s.Br.col(u))) link(i, model.inputs[u].owner);
    }
    for (int j = 0; j < m; ++j) {
      const Matrix block = pm.state_coeffs.row(i).segment(
          model.topology.state_offset(j), model.subsystems[j].states());
      if (is_nonzero_block(block)) link(i, j);
    }
  }
  return nb;
}

namespace {

void prune_zero_blocks(BlockMap& blocks) {
  for (auto it = blocks.begin(); it != blocks.end();) {
    if (it->first.first != it->first.second && !is_nonzero_block(it->second)) {
      it = blocks.erase(it);
    } else {
      ++it;
    }
  }
}

Matrix& block_at(BlockMap& blocks, int i, int j, int rows, int cols) {
  auto it = blocks.find({i, j});
  if (it == blocks.end()) {
    it = blocks.emplace(std::make_pair(i, j), Matrix::Zero(rows, cols)).first;
  }
  return it->second;
}

}  // namespace

MpcProblem build_qp(const HpvModel& model, const MpcScenario& scenario,
                    const std::vector<double>& p_ref,
                    const std::vector<Vector>& x0) {
  const int m = static_cast<int>(model.subsystems.size());
  const int n_h = scenario.horizon;
  const MpcWeights& w = scenario.weights;
  const Scheme scheme = scenario.scheme;
  if (n_h < 1) throw std::invalid_argument("horizon must be >= 1");
  if (static_cast<int>(p_ref.size()) < n_h) {
    throw std::invalid_argument("reference shorter than the horizon");
  }
  if (static_cast<int>(x0.size()) != m) {
    throw std::invalid_argument("one state estimate per subsystem required");
  }
  if (!(w.q >= 0.0) || !(w.r > 0.0) || !(w.gamma > 0.0) ||
      !(w.rho_delta > 0.0) || !(w.flow_scale > 0.0) || !(w.power_scale > 0.0)) {
    throw std::invalid_argument("weights must be positive (q >= 0)");
  }
  for (int i = 0; i < m; ++i) {
    if (!model.subsystems[i].reduced) {
      throw std::invalid_argument("model must be reduced before building the QP");
    }
    if (x0[i].size() != model.subsystems[i].reduced_states()) {
      throw std::invalid_argument("state estimate has the wrong length");
    }
  }
  const bool decentralized = scheme == Scheme::kDecentralized;
  const double fs = w.flow_scale;

  MpcProblem out;
  out.scheme = scheme;
  const Neighborhoods nb = model_neighborhoods(model);
  if (scheme == Scheme::kLocRefDyn) out.exchange = build_exchange_structure(nb);
  else out.exchange.managed.assign(m, {});

  std::vector<int> owner_pos(model.num_inputs(), -1);
  out.layout.resize(m);
  for (int i = 0; i < m; ++i) {
    auto& l = out.layout[i];
    l.inputs = model.owned_inputs(i);
    for (std::size_t p = 0; p < l.inputs.size(); ++p) {
      owner_pos[l.inputs[p]] = static_cast<int>(p);
    }
    l.order = model.subsystems[i].reduced_states();
    l.horizon = n_h;
    l.deltas = static_cast<int>(out.exchange.managed[i].size());
  }

  std::vector<int> sizes(m);
  for (int i = 0; i < m; ++i) sizes[i] = out.layout[i].size();
  PartitionedQP& qp = out.qp;
  qp = PartitionedQP::with_partition(sizes, w.gamma);

  // Cost.
  for (int i = 0; i < m; ++i) {
    const auto& l = out.layout[i];
    Matrix h = Matrix::Zero(l.size(), l.size());
    for (int k = 0; k < n_h; ++k) {
      for (std::size_t p = 0; p < l.inputs.size(); ++p) {
        h(l.input_var(k, p), l.input_var(k, p)) = w.r;
      }
      for (int s = 0; s < l.order; ++s) h(l.state_var(k + 1, s), l.state_var(k + 1, s)) = w.q;
      for (int d = 0; d < l.deltas; ++d) h(l.delta_var(k, d), l.delta_var(k, d)) = w.rho_delta;
    }
    qp.quad_blocks[i] = std::move(h);
  }
  for (const auto& vp : model.virtual_pairs) {
    const auto& l = out.layout[vp.subsystem];
    const Matrix rc = build_relaxed_cost(w.r, w.r, w.alpha);
    for (int k = 0; k < n_h; ++k) {
      VirtualFlowPair pair = vp;
      pair.step = k;
      pair.turbine_var = l.input_var(k, owner_pos[vp.turbine_var]);
      pair.pump_var = l.input_var(k, owner_pos[vp.pump_var]);
      pair.r_turbine = w.r;
      pair.r_pump = w.r;
      pair.alpha = w.alpha;
      Matrix& h = qp.quad_blocks[vp.subsystem];
      h(pair.turbine_var, pair.turbine_var) = rc(0, 0);
      h(pair.turbine_var, pair.pump_var) = rc(0, 1);
      h(pair.pump_var, pair.turbine_var) = rc(1, 0);
      h(pair.pump_var, pair.pump_var) = rc(1, 1);
      out.pairs.push_back(pair);
    }
  }
  if (!(w.q > 0.0)) {
    // States still need curvature for the dual to be smooth.
    for (int i = 0; i < m; ++i) {
      const auto& l = out.layout[i];
      for (int k = 1; k <= n_h; ++k) {
        for (int s = 0; s < l.order; ++s) {
          qp.quad_blocks[i](l.state_var(k, s), l.state_var(k, s)) = 1e-8;
        }
      }
    }
  }

  // Dynamics: xr_i(k+1) - Ar xr_i(k) - sum_j Br_ij q_j(k) = 0.
  for (int i = 0; i < m; ++i) {
    const auto& sub = model.subsystems[i];
    const auto& l = out.layout[i];
    const int r = l.order;
    const int rows = n_h * r;
    Vector rhs = Vector::Zero(rows);
    rhs.head(r) = sub.Ar * x0[i];
    Matrix& own = block_at(qp.eq_blocks, i, i, rows, sizes[i]);
    for (int k = 0; k < n_h; ++k) {
      own.block(k * r, l.state_var(k + 1, 0), r, r) = Matrix::Identity(r, r);
      if (k >= 1) own.block(k * r, l.state_var(k, 0), r, r) = -sub.Ar;
      for (int u = 0; u < model.num_inputs(); ++u) {
        const int j = model.inputs[u].owner;
        if (decentralized && j != i) continue;
        if (!is_nonzero_block(sub.Br.col(u))) continue;
        Matrix& blk = block_at(qp.eq_blocks, i, j, rows, sizes[j]);
        blk.block(k * r, out.layout[j].input_var(k, owner_pos[u]), r, 1) =
            -fs * sub.Br.col(u);
      }
    }
    qp.eq_rhs[i] = std::move(rhs);
  }

  // Output and input boxes.
  for (int i = 0; i < m; ++i) {
    const auto& sub = model.subsystems[i];
    const auto& l = out.layout[i];
    const int ny = static_cast<int>(sub.Cr.rows());
    const int nu = static_cast<int>(l.inputs.size());
    const int rows = n_h * 2 * (ny + nu);
    Matrix c = Matrix::Zero(rows, sizes[i]);
    Vector d(rows);
    int row = 0;
    for (int k = 1; k <= n_h; ++k) {
      for (int o = 0; o < ny; ++o) {
        const double hi = sub.y_upper[o] - w.output_backoff;
        const double lo = sub.y_lower[o] + w.output_backoff;
        if (lo > hi) throw std::invalid_argument("output box is empty after back-off");
        c.block(row, l.state_var(k, 0), 1, l.order) = sub.Cr.row(o);
        d[row++] = hi;
        c.block(row, l.state_var(k, 0), 1, l.order) = -sub.Cr.row(o);
        d[row++] = -lo;
      }
    }
    for (int k = 0; k < n_h; ++k) {
      for (int p = 0; p < nu; ++p) {
        const ModelInput& in = model.inputs[l.inputs[p]];
        if (in.lower > in.upper) throw std::invalid_argument("input box is empty");
        c(row, l.input_var(k, p)) = 1.0;
        d[row++] = in.upper / fs;
        c(row, l.input_var(k, p)) = -1.0;
        d[row++] = -in.lower / fs;
      }
    }
    qp.ineq_blocks[{i, i}] = std::move(c);
    qp.ineq_rhs[i] = std::move(d);
  }

  // Power tracking rows.
  const PowerMap pm = linearize_power(model);
  const Matrix pr = pm.reduced_state_coeffs(model);
  const Matrix pu = pm.input_coeffs * fs;
  std::vector<int> red_off(m, 0);
  for (int i = 1; i < m; ++i) red_off[i] = red_off[i - 1] + out.layout[i - 1].order;
  const std::vector<double> ref_head(p_ref.begin(), p_ref.begin() + n_h);
  if (scheme != Scheme::kGlobalRef) {
    out.local_refs = static_division(ref_head, pm.offsets);
  }

  // Writes the coefficients of p_hat_src(k) into row `row` of owner's blocks
  // and returns the part contributed by the known state xr(0).
  auto add_power = [&](int owner, int rows, int row, int src, int k) {
    double known = 0.0;
    for (int j = 0; j < m; ++j) {
      if (decentralized && j != src) continue;
      const auto& lj = out.layout[j];
      const Vector coeff = pr.row(src).segment(red_off[j], lj.order);
      if (k == 0) {
        known += coeff.dot(x0[j]);
      } else if (is_nonzero_block(coeff)) {
        Matrix& blk = block_at(qp.onenorm_blocks, owner, j, rows, sizes[j]);
        blk.block(row, lj.state_var(k, 0), 1, lj.order) += coeff.transpose();
      }
      for (std::size_t p = 0; p < lj.inputs.size(); ++p) {
        const double v = pu(src, lj.inputs[p]);
        if (v == 0.0) continue;
        Matrix& blk = block_at(qp.onenorm_blocks, owner, j, rows, sizes[j]);
        blk(row, lj.input_var(k, p)) += v;
      }
    }
    return known;
  };

  if (scheme == Scheme::kGlobalRef) {
    std::vector<std::vector<int>> steps(m);
    for (int k = 0; k < n_h; ++k) steps[k % m].push_back(k);
    for (int o = 0; o < m; ++o) {
      const int rows = static_cast<int>(steps[o].size());
      Vector offset(rows);
      for (int r = 0; r < rows; ++r) {
        const int k = steps[o][r];
        double known = 0.0;
        for (int src = 0; src < m; ++src) known += add_power(o, rows, r, src, k);
        offset[r] = p_ref[k] - pm.offsets.sum() - known;
      }
      qp.onenorm_offset[o] = std::move(offset);
    }
  } else {
    for (int i = 0; i < m; ++i) {
      Vector offset(n_h);
      for (int k = 0; k < n_h; ++k) {
        const double known = add_power(i, n_h, k, i, k);
        offset[k] = out.local_refs(k, i) - pm.offsets[i] - known;
        if (scheme == Scheme::kLocRefDyn) {
          const auto& li = out.layout[i];
          for (int d = 0; d < li.deltas; ++d) {
            block_at(qp.onenorm_blocks, i, i, n_h, sizes[i])(k, li.delta_var(k, d)) -= 1.0;
          }
          for (int j = 0; j < m; ++j) {
            const int link = out.exchange.link_index(j, i);
            if (link < 0) continue;
            block_at(qp.onenorm_blocks, i, j, n_h, sizes[j])(
                k, out.layout[j].delta_var(k, link)) += 1.0;
          }
        }
      }
      qp.onenorm_offset[i] = std::move(offset);
    }
  }
  if (w.power_scale != 1.0) {
    for (auto& [key, blk] : qp.onenorm_blocks) blk /= w.power_scale;
    for (auto& off : qp.onenorm_offset) off /= w.power_scale;
    qp.gamma = w.gamma * w.power_scale;
  }
  prune_zero_blocks(qp.eq_blocks);
  prune_zero_blocks(qp.onenorm_blocks);
  return out;
}

Vector first_inputs(const MpcProblem& problem, const HpvModel& model,
                    const Vector& x, double flow_scale) {
  Vector dq = Vector::Zero(model.num_inputs());
  for (int i = 0; i < static_cast<int>(problem.layout.size()); ++i) {
    const auto& l = problem.layout[i];
    const int off = problem.qp.var_offset(i);
    for (std::size_t p = 0; p < l.inputs.size(); ++p) {
      dq[l.inputs[p]] = flow_scale * x[off + l.input_var(0, p)];
    }
  }
  return dq;
}

std::vector<Vector> predicted_states(const MpcProblem& problem, const Vector& x,
                                     int i) {
  const auto& l = problem.layout[i];
  const int off = problem.qp.var_offset(i);
  std::vector<Vector> out;
  for (int k = 1; k <= l.horizon; ++k) {
    out.push_back(x.segment(off + l.state_var(k, 0), l.order));
  }
  return out;
}

std::vector<Matrix> exchanged_references(const MpcProblem& problem,
                                         const Vector& x) {
  const int m = static_cast<int>(problem.layout.size());
  const int n_h = m > 0 ? problem.layout[0].horizon : 0;
  std::vector<Matrix> out(n_h, Matrix::Zero(m, m));
  for (int i = 0; i < m; ++i) {
    const auto& l = problem.layout[i];
    const int off = problem.qp.var_offset(i);
    for (int k = 0; k < n_h; ++k) {
      for (int d = 0; d < l.deltas; ++d) {
        out[k](i, problem.exchange.managed[i][d]) = x[off + l.delta_var(k, d)];
      }
    }
  }
  return out;
}

}  // namespace hpv
