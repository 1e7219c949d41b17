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

#include "hpv/dist_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace hpv {
namespace {

// Both orchestrations funnel through these two kernels so that the floating
// point operations, and their order, are identical.

template <typename DualLookup>
void primal_kernel(AgentState& a, DualLookup&& dual_of) {
  Vector v = a.g;
  for (const auto& [j, m] : a.eq_col) {
    v.noalias() += m.transpose() * dual_of(j).lambda;
  }
  for (const auto& [j, m] : a.ineq_col) {
    v.noalias() += m.transpose() * dual_of(j).mu;
  }
  for (const auto& [j, m] : a.onenorm_col) {
    v.noalias() += m.transpose() * dual_of(j).nu;
  }
  const double w = acceleration_weight(a.k);
  a.x_prev = std::move(a.x);
  a.x = -(a.H_inv * v);
  a.x_bar = a.x + w * (a.x - a.x_prev);
}

Vector project_box(const Vector& v, double lo, double hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

template <typename PrimalLookup>
void dual_kernel(AgentState& a, PrimalLookup&& xbar_of) {
  const double w = acceleration_weight(a.k);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  auto residual = [&](const std::vector<std::pair<int, SparseBlock>>& rows,
                      const Vector& rhs) {
    Vector r = -rhs;
    for (const auto& [j, m] : rows) r.noalias() += m * xbar_of(j);
    return r;
  };

  DualBlock next;
  const Vector r_eq = residual(a.eq_row, a.b);
  next.lambda = a.dual.lambda + w * (a.dual.lambda - a.dual_prev.lambda) +
                r_eq / a.lipschitz;
  a.eq_residual = r_eq.size() > 0 ? r_eq.lpNorm<Eigen::Infinity>() : 0.0;

  const Vector r_in = residual(a.ineq_row, a.d);
  next.mu = project_box(
      a.dual.mu + w * (a.dual.mu - a.dual_prev.mu) + r_in / a.lipschitz, 0.0,
      kInf);
  a.ineq_residual = r_in.size() > 0 ? std::max(0.0, r_in.maxCoeff()) : 0.0;

  const Vector r_p = residual(a.onenorm_row, a.p);
  next.nu = project_box(
      a.dual.nu + w * (a.dual.nu - a.dual_prev.nu) + r_p / a.lipschitz,
      -a.gamma, a.gamma);

  a.dual_prev = std::move(a.dual);
  a.dual = std::move(next);
  ++a.k;
}

// Local share of the negative dual value at (x^k, lambda^k): with x^k the
// Lagrangian minimizer, 1/2 v'H^-1 v = 1/2 x'Hx.
double local_dual_term(const AgentState& a, const DualBlock& dual) {
  return 0.5 * a.x.dot(a.H * a.x) + a.b.dot(dual.lambda) + a.d.dot(dual.mu) +
         a.p.dot(dual.nu);
}

template <typename Fn>
void for_each_agent(int count, int workers, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int nthreads = std::min(workers, count);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += nthreads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

Vector fit_length(const Vector& v, Eigen::Index n) {
  Vector out = Vector::Zero(n);
  const Eigen::Index c = std::min(n, v.size());
  out.head(c) = v.head(c);
  return out;
}

std::vector<Vector> row_scales(const BlockMap& blocks,
                               const std::vector<Vector>& rhs, bool enabled) {
  std::vector<Vector> scale;
  for (const auto& r : rhs) scale.push_back(Vector::Ones(r.size()));
  if (!enabled) return scale;
  std::vector<Vector> norms;
  for (const auto& r : rhs) norms.push_back(Vector::Zero(r.size()));
  for (const auto& [key, blk] : blocks) {
    if (blk.size() == 0) continue;
    norms[key.first] =
        norms[key.first].cwiseMax(blk.cwiseAbs().rowwise().maxCoeff());
  }
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    for (Eigen::Index r = 0; r < norms[i].size(); ++r) {
      if (norms[i][r] > 0.0) scale[i][r] = 1.0 / norms[i][r];
    }
  }
  return scale;
}

void apply_row_scale(BlockMap& blocks, std::vector<Vector>& rhs,
                     const std::vector<Vector>& scale) {
  for (auto& [key, blk] : blocks) blk = scale[key.first].asDiagonal() * blk;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    rhs[i] = rhs[i].cwiseProduct(scale[i]);
  }
}

// Everything a run needs besides the orchestration.
struct RunState {
  PreparedProblem prep;
  std::vector<AgentState> agents;
  SolveOutcome out;
  bool has_rows = false;
};

RunState start_run(const PartitionedQP& qp, const std::optional<WarmStart>& warm,
                   const SolverOptions& options) {
  const ValidationReport rep = validate_problem(qp);
  if (!rep.ok()) {
    throw std::invalid_argument("invalid problem: " + rep.violations.front());
  }
  RunState st;
  st.prep = prepare_problem(qp, options);
  const PartitionedQP& s = st.prep.scaled;
  const int m = s.num_subsystems();
  st.has_rows = s.num_eq() + s.num_ineq() + s.num_onenorm() > 0;
  st.agents.reserve(m);
  for (int i = 0; i < m; ++i) {
    st.agents.push_back(
        make_agent(s, st.prep.neighborhoods, i, st.prep.lipschitz));
  }
  if (warm) {
    if (warm->x.size() != s.num_vars()) {
      throw std::invalid_argument("warm start primal has wrong length");
    }
    for (int i = 0; i < m; ++i) {
      AgentState& a = st.agents[i];
      a.x = subsystem_slice(s, warm->x, i);
      auto pick = [&](const std::vector<Vector>& src, Eigen::Index n) {
        return i < static_cast<int>(src.size()) ? fit_length(src[i], n)
                                                : Vector(Vector::Zero(n));
      };
      a.dual.lambda = pick(warm->duals.lambda, a.b.size())
                          .cwiseQuotient(st.prep.eq_scale[i]);
      a.dual.mu = pick(warm->duals.mu, a.d.size())
                      .cwiseQuotient(st.prep.ineq_scale[i]);
      a.dual.nu = project_box(pick(warm->duals.nu, a.p.size()), -s.gamma,
                              s.gamma);
      a.dual.mu = a.dual.mu.cwiseMax(0.0);
      a.dual_prev = a.dual;
    }
  }
  st.out.lipschitz = st.prep.lipschitz;
  return st;
}

// Sums the monitor value and residuals, records history, and decides whether
// to stop after round k. Called after step 3.
bool record_round(RunState& st, int k, const SolverOptions& options,
                  RoundStats round) {
  double f = 0.0, eq = 0.0, in = 0.0;
  for (const auto& a : st.agents) {
    f += local_dual_term(a, a.dual_prev);
    eq = std::max(eq, a.eq_residual);
    in = std::max(in, a.ineq_residual);
  }
  if (!std::isfinite(f)) {
    throw SolverDivergence(
        "non-finite dual value at iteration " + std::to_string(k), k);
  }
  auto& out = st.out;
  out.dual_history.push_back(f);
  out.eq_residual_history.push_back(eq);
  out.ineq_residual_history.push_back(in);
  out.rounds.push_back(round);
  out.iterations = k + 1;

  if (options.observer) {
    std::vector<Vector> xs;
    std::vector<DualBlock> ds;
    for (const auto& a : st.agents) {
      xs.push_back(a.x);
      ds.push_back(a.dual);
    }
    options.observer(k, xs, ds);
  }

  const StoppingRule& rule = options.stop;
  if (rule.mode == StoppingRule::Mode::kFixedIterations) {
    if (out.iterations >= rule.fixed_iterations) {
      out.reason = TerminationReason::kFixedIterations;
      return true;
    }
    return false;
  }
  if (!st.has_rows) {
    out.reason = TerminationReason::kTolerance;
    return true;
  }
  const auto& h = out.dual_history;
  const int n = static_cast<int>(h.size());
  if (n > rule.window && eq <= rule.eps_eq && in <= rule.eps_ineq &&
      std::abs(h[n - 1] - h[n - 1 - rule.window]) <=
          rule.eps_f * std::max(1.0, std::abs(h[n - 1]))) {
    out.reason = TerminationReason::kTolerance;
    return true;
  }
  if (out.iterations >= rule.max_iterations) {
    out.reason = TerminationReason::kMaxIterations;
    return true;
  }
  return false;
}

// Final primal is x^k, duals are lambda^k (the values x^k was computed from).
SolveOutcome finish_run(RunState& st, const PartitionedQP& qp) {
  const int m = qp.num_subsystems();
  SolveOutcome& out = st.out;
  std::vector<Vector> xs;
  out.duals = DualPoint::zeros(qp);
  for (int i = 0; i < m; ++i) {
    const AgentState& a = st.agents[i];
    xs.push_back(a.x);
    out.duals.lambda[i] = a.dual_prev.lambda.cwiseProduct(st.prep.eq_scale[i]);
    out.duals.mu[i] = a.dual_prev.mu.cwiseProduct(st.prep.ineq_scale[i]);
    out.duals.nu[i] = a.dual_prev.nu;
  }
  out.x = stack(xs);
  const Matrix p = qp.dense_onenorm();
  out.x_aux = p.rows() > 0 ? Vector(p * out.x - qp.stacked_onenorm_offset())
                           : Vector(0);
  for (const auto& r : out.rounds) {
    out.totals.messages += r.messages;
    out.totals.scalars += r.scalars;
    out.totals.bits += r.bits;
  }
  return std::move(out);
}

int iteration_budget(const StoppingRule& rule) {
  return rule.mode == StoppingRule::Mode::kFixedIterations
             ? rule.fixed_iterations
             : rule.max_iterations;
}

void check_rule(const StoppingRule& rule) {
  if (iteration_budget(rule) < 1) {
    throw std::invalid_argument("iteration budget must be at least 1");
  }
  if (rule.window < 1) throw std::invalid_argument("window must be >= 1");
}

}  // namespace

StoppingRule StoppingRule::fixed(int iterations) {
  StoppingRule r;
  r.mode = Mode::kFixedIterations;
  r.fixed_iterations = iterations;
  return r;
}

std::string to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::kTolerance:
      return "tolerance";
    case TerminationReason::kMaxIterations:
      return "max-iterations";
    case TerminationReason::kFixedIterations:
      return "fixed-iterations";
  }
  return "unknown";
}

WarmStart WarmStart::from(const SolveOutcome& outcome) {
  return WarmStart{outcome.x, outcome.duals};
}

double acceleration_weight(int k) {
  return static_cast<double>(k - 1) / static_cast<double>(k + 2);
}

PreparedProblem prepare_problem(const PartitionedQP& qp,
                                const SolverOptions& options) {
  PreparedProblem prep;
  prep.scaled = qp;
  prep.eq_scale = row_scales(qp.eq_blocks, qp.eq_rhs, options.scale_rows);
  prep.ineq_scale = row_scales(qp.ineq_blocks, qp.ineq_rhs, options.scale_rows);
  apply_row_scale(prep.scaled.eq_blocks, prep.scaled.eq_rhs, prep.eq_scale);
  apply_row_scale(prep.scaled.ineq_blocks, prep.scaled.ineq_rhs,
                  prep.ineq_scale);
  prep.neighborhoods = compute_neighborhoods(prep.scaled);
  if (options.lipschitz) {
    prep.lipschitz = *options.lipschitz;
  } else {
    prep.lipschitz = lipschitz_constant(prep.scaled);
  }
  // Without rows the step size is never used.
  if (!(prep.lipschitz > 0.0)) prep.lipschitz = 1.0;
  return prep;
}

AgentState make_agent(const PartitionedQP& qp, const Neighborhoods& nb, int i,
                      double lipschitz) {
  if (!(lipschitz > 0.0)) throw std::invalid_argument("lipschitz must be > 0");
  AgentState a;
  a.index = i;
  a.neighbors.assign(nb[i].begin(), nb[i].end());
  a.H = qp.quad_blocks[i];
  a.H_factor.compute(a.H);
  if (a.H_factor.info() != Eigen::Success) {
    throw std::domain_error("H_" + std::to_string(i + 1) +
                            " is not positive definite");
  }
  a.H_inv = Matrix(a.H_factor.solve(Matrix::Identity(a.H.rows(), a.H.cols())))
                .sparseView(0.0, 0.0);
  a.g = qp.lin_cost[i];
  a.b = qp.eq_rhs[i];
  a.d = qp.ineq_rhs[i];
  a.p = qp.onenorm_offset[i];
  a.gamma = qp.gamma;
  a.lipschitz = lipschitz;
  for (int j : a.neighbors) {
    auto take = [&](const BlockMap& blocks,
                    std::vector<std::pair<int, SparseBlock>>& row,
                    std::vector<std::pair<int, SparseBlock>>& col) {
      auto r = blocks.find({i, j});
      if (r != blocks.end() && is_nonzero_block(r->second)) {
        row.emplace_back(j, r->second.sparseView(0.0, 0.0));
      }
      auto c = blocks.find({j, i});
      if (c != blocks.end() && is_nonzero_block(c->second)) {
        col.emplace_back(j, c->second.sparseView(0.0, 0.0));
      }
    };
    take(qp.eq_blocks, a.eq_row, a.eq_col);
    take(qp.ineq_blocks, a.ineq_row, a.ineq_col);
    take(qp.onenorm_blocks, a.onenorm_row, a.onenorm_col);
  }
  const int n = qp.partition[i];
  a.x = Vector::Zero(n);
  a.x_prev = Vector::Zero(n);
  a.x_bar = Vector::Zero(n);
  a.dual.lambda = Vector::Zero(a.b.size());
  a.dual.mu = Vector::Zero(a.d.size());
  a.dual.nu = Vector::Zero(a.p.size());
  a.dual_prev = a.dual;
  return a;
}

namespace {

template <typename T>
const T& lookup_exact(const std::map<int, T>& data, int j) {
  auto it = data.find(j);
  if (it == data.end()) {
    throw std::invalid_argument("missing data from neighbor " +
                                std::to_string(j + 1));
  }
  return it->second;
}

template <typename T>
void check_keys(const std::map<int, T>& data, const AgentState& a) {
  for (int j : a.neighbors) lookup_exact(data, j);
  if (data.size() != a.neighbors.size()) {
    throw std::invalid_argument("data from non-neighbor supplied to agent " +
                                std::to_string(a.index + 1));
  }
}

}  // namespace

std::pair<Vector, Vector> local_primal_update(
    AgentState& agent, const std::map<int, DualBlock>& neighbor_duals) {
  check_keys(neighbor_duals, agent);
  primal_kernel(agent, [&](int j) -> const DualBlock& {
    return lookup_exact(neighbor_duals, j);
  });
  return {agent.x, agent.x_bar};
}

DualBlock local_dual_update(AgentState& agent,
                            const std::map<int, Vector>& neighbor_primals) {
  check_keys(neighbor_primals, agent);
  dual_kernel(agent, [&](int j) -> const Vector& {
    return lookup_exact(neighbor_primals, j);
  });
  return agent.dual;
}

SolveOutcome run_rounds(const PartitionedQP& qp,
                        const std::optional<WarmStart>& warm,
                        const SolverOptions& options) {
  check_rule(options.stop);
  RunState st = start_run(qp, warm, options);
  const int m = static_cast<int>(st.agents.size());
  MessageNetwork net(st.prep.neighborhoods, options.bits_per_scalar);

  // What each agent has heard from its neighbors, indexed by sender.
  std::vector<std::vector<DualBlock>> heard_duals(m, std::vector<DualBlock>(m));
  std::vector<std::vector<Vector>> heard_xbar(m, std::vector<Vector>(m));

  auto broadcast = [&](auto payload_of) {
    for (int i = 0; i < m; ++i) {
      for (int j : st.agents[i].neighbors) {
        if (j == i) continue;
        net.post(Message{i, j, payload_of(st.agents[i])});
      }
    }
    net.deliver();
  };
  auto exchange_duals = [&] {
    broadcast([](const AgentState& a) {
      return std::vector<Vector>{a.dual.lambda, a.dual.mu, a.dual.nu};
    });
    for (int i = 0; i < m; ++i) {
      for (const Message& msg : net.inbox(i)) {
        DualBlock& d = heard_duals[i][msg.from];
        d.lambda = msg.payload[0];
        d.mu = msg.payload[1];
        d.nu = msg.payload[2];
      }
    }
  };

  exchange_duals();
  const int budget = iteration_budget(options.stop);
  for (int k = 0; k < budget; ++k) {
    for_each_agent(m, options.workers, [&](int i) {
      AgentState& a = st.agents[i];
      primal_kernel(a, [&](int j) -> const DualBlock& {
        return j == i ? a.dual : heard_duals[i][j];
      });
    });
    broadcast([](const AgentState& a) { return std::vector<Vector>{a.x_bar}; });
    for (int i = 0; i < m; ++i) {
      for (const Message& msg : net.inbox(i)) {
        heard_xbar[i][msg.from] = msg.payload[0];
      }
    }
    for_each_agent(m, options.workers, [&](int i) {
      AgentState& a = st.agents[i];
      dual_kernel(a, [&](int j) -> const Vector& {
        return j == i ? a.x_bar : heard_xbar[i][j];
      });
    });
    if (record_round(st, k, options, net.take_round_stats())) break;
    exchange_duals();
  }
  return finish_run(st, qp);
}

SolveOutcome centralized_reference_run(const PartitionedQP& qp,
                                       const std::optional<WarmStart>& warm,
                                       const SolverOptions& options) {
  check_rule(options.stop);
  RunState st = start_run(qp, warm, options);
  const int m = static_cast<int>(st.agents.size());
  auto& agents = st.agents;
  const int budget = iteration_budget(options.stop);
  for (int k = 0; k < budget; ++k) {
    // Step 1 reads only duals and step 3 reads only xbar, so reading the
    // global arrays in place is equivalent to reading exchanged snapshots.
    for (int i = 0; i < m; ++i) {
      primal_kernel(agents[i],
                    [&](int j) -> const DualBlock& { return agents[j].dual; });
    }
    for (int i = 0; i < m; ++i) {
      dual_kernel(agents[i],
                  [&](int j) -> const Vector& { return agents[j].x_bar; });
    }
    if (record_round(st, k, options, RoundStats{})) break;
  }
  return finish_run(st, qp);
}

Json outcome_to_json(const SolveOutcome& outcome) {
  Json j;
  j["x"] = to_json(outcome.x);
  j["x_aux"] = to_json(outcome.x_aux);
  j["duals"] = dual_to_json(outcome.duals);
  j["iterations"] = outcome.iterations;
  j["termination"] = to_string(outcome.reason);
  j["lipschitz"] = outcome.lipschitz;
  j["dual_history"] = outcome.dual_history;
  j["messages"] = outcome.totals.messages;
  j["scalars"] = outcome.totals.scalars;
  j["bits"] = outcome.totals.bits;
  return j;
}

std::string outcome_history_csv(const SolveOutcome& outcome) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "k,dual_value,eq_residual,ineq_residual,messages,scalars,bits\n";
  for (int k = 0; k < outcome.iterations; ++k) {
    const RoundStats& r = outcome.rounds[k];
    os << k << ',' << outcome.dual_history[k] << ','
       << outcome.eq_residual_history[k] << ','
       << outcome.ineq_residual_history[k] << ',' << r.messages << ','
       << r.scalars << ',' << r.bits << '\n';
  }
  return os.str();
}

}  // namespace hpv
