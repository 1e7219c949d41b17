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

#include "hpv/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "hpv/bnb.hpp"
#include "hpv/observer.hpp"

namespace hpv {

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::symmetric() {
  const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;  // [0, 1)
  return 2.0 * u - 1.0;
}

std::vector<double> default_reference(double steady_total, int samples,
                                      double ts, double amplitude) {
  // (hour, shape) knots of one day; shape in [-1, 1].
  static const double kHours[] = {0, 4, 8, 11, 14, 18, 21, 24};
  static const double kShape[] = {-0.5, -1.0, 0.6, 1.0, 0.4, 0.8, 0.0, -0.5};
  std::vector<double> out(samples);
  for (int k = 0; k < samples; ++k) {
    const double h = std::fmod(k * ts / 3600.0, 24.0);
    int s = 0;
    while (s + 1 < 7 && h >= kHours[s + 1]) ++s;
    const double t = (h - kHours[s]) / (kHours[s + 1] - kHours[s]);
    const double shape = kShape[s] + t * (kShape[s + 1] - kShape[s]);
    out[k] = steady_total * (1.0 + amplitude * shape);
  }
  return out;
}

double ClosedLoopLog::mean_abs_error() const {
  if (steps.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : steps) s += r.abs_error;
  return s / steps.size();
}

double ClosedLoopLog::mean_iterations() const {
  if (steps.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : steps) s += r.iterations;
  return s / steps.size();
}

double ClosedLoopLog::min_output_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : steps) m = std::min(m, r.output_margin);
  return m;
}

double ClosedLoopLog::min_input_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : steps) m = std::min(m, r.input_margin);
  return m;
}

double ClosedLoopLog::max_complementarity() const {
  double m = 0.0;
  for (const auto& r : steps) m = std::max(m, r.max_complementarity);
  return m;
}

std::int64_t ClosedLoopLog::total_messages() const {
  std::int64_t s = 0;
  for (const auto& r : steps) s += r.messages;
  return s;
}

std::int64_t ClosedLoopLog::total_scalars() const {
  std::int64_t s = 0;
  for (const auto& r : steps) s += r.scalars;
  return s;
}

std::int64_t ClosedLoopLog::total_bits() const {
  std::int64_t s = 0;
  for (const auto& r : steps) s += r.bits;
  return s;
}

double ClosedLoopLog::scalars_per_iteration() const {
  std::int64_t it = 0;
  for (const auto& r : steps) it += r.iterations;
  return it > 0 ? static_cast<double>(total_scalars()) / it : 0.0;
}

std::int64_t communication_accounting(std::int64_t vars_per_iteration,
                                      std::int64_t bits_per_var,
                                      std::int64_t iterations,
                                      std::int64_t solves_per_step) {
  if (vars_per_iteration <= 0 || bits_per_var <= 0 || iterations <= 0 ||
      solves_per_step <= 0) {
    throw std::invalid_argument("communication accounting needs positive counts");
  }
  return solves_per_step * vars_per_iteration * bits_per_var * iterations;
}

ClosedLoopLog run_closed_loop(const HpvModel& model, const SimConfig& config) {
  if (config.steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (!model.augmented) throw std::invalid_argument("model must be augmented");
  const int m = static_cast<int>(model.subsystems.size());
  const int n_h = config.mpc.horizon;
  const double fs = config.mpc.weights.flow_scale;
  const PowerMap pm = linearize_power(model);

  std::vector<double> ref = config.reference;
  if (ref.empty()) {
    ref = default_reference(pm.offsets.sum(), config.steps + n_h, model.params.ts,
                            config.reference_amplitude);
  }
  if (static_cast<int>(ref.size()) < config.steps + n_h - 1) {
    throw std::invalid_argument("reference must cover steps + horizon - 1 samples");
  }
  while (static_cast<int>(ref.size()) < config.steps + n_h) ref.push_back(ref.back());

  const Matrix a = model.full_A();
  const Matrix b = model.full_B();
  const Matrix c = model.full_C();
  const Vector x_ss_abs = model.full_x_ss().cwiseAbs();
  Vector y_lo(c.rows()), y_hi(c.rows());
  {
    Eigen::Index off = 0;
    for (const auto& s : model.subsystems) {
      y_lo.segment(off, s.y_lower.size()) = s.y_lower;
      y_hi.segment(off, s.y_upper.size()) = s.y_upper;
      off += s.y_lower.size();
    }
  }
  std::vector<Matrix> t_blocks;
  for (const auto& s : model.subsystems) t_blocks.push_back(s.T);

  ObserverBank bank = design_model_observer(
      model, std::max(config.process_noise, 1e-4),
      std::max(config.measurement_noise, 1e-3));

  SplitMix64 process_rng(config.seed * 2 + 1);
  SplitMix64 meas_rng(config.seed * 2 + 2);
  LipschitzCache cache;
  std::optional<WarmStart> warm;

  ClosedLoopLog log;
  log.scheme = config.mpc.scheme;
  log.seed = config.seed;
  for (const auto& in : model.params.inputs) log.flow_names.push_back(in.name);
  for (const auto& s : model.subsystems) log.subsystem_names.push_back(s.name);

  Vector x = Vector::Zero(a.rows());
  for (int k = 0; k < config.steps; ++k) {
    Vector y = c * x;
    if (config.noise) {
      for (Eigen::Index o = 0; o < y.size(); ++o) {
        y[o] += config.measurement_noise * meas_rng.symmetric();
      }
    }
    const std::vector<Vector> x0 = filtered_estimates(bank, y);
    const std::vector<double> window(ref.begin() + k, ref.begin() + k + n_h);
    const MpcProblem problem = build_qp(model, config.mpc, window, x0);

    TwoPhaseOptions opts;
    opts.solver.stop = config.stop;
    opts.solver.workers = config.workers;
    opts.tol = config.complementarity_tol;
    opts.cache = &cache;
    opts.cache_key = to_string(config.mpc.scheme);
    TwoPhaseResult res;
    try {
      res = two_phase_solve(problem.qp, problem.pairs, opts, warm);
    } catch (const std::exception& e) {
      throw SimulationError(std::string("step ") + std::to_string(k) + ": " + e.what(), k);
    }
    warm = WarmStart::from(res.outcome);

    StepLog row;
    row.k = k;
    row.p_ref = ref[k];
    if (problem.local_refs.size() > 0) {
      for (int i = 0; i < m; ++i) row.local_refs.push_back(problem.local_refs(0, i));
    }
    Vector dq = first_inputs(problem, model, res.outcome.x, fs);
    double violation = 0.0, margin = std::numeric_limits<double>::infinity();
    for (int u = 0; u < model.num_inputs(); ++u) {
      const ModelInput& in = model.inputs[u];
      violation = std::max({violation, dq[u] - in.upper, in.lower - dq[u]});
      dq[u] = std::clamp(dq[u], in.lower, in.upper);
      margin = std::min({margin, dq[u] - in.lower, in.upper - dq[u]});
    }
    row.raw_input_violation = violation;
    row.input_margin = margin;
    for (const auto& p : problem.pairs) {
      const int off = problem.qp.var_offset(p.subsystem);
      row.max_complementarity =
          std::max(row.max_complementarity,
                   res.outcome.x[off + p.turbine_var] * res.outcome.x[off + p.pump_var]);
    }
    const Vector flows = model.q_ss_physical + model.input_to_physical() * dq;
    row.flows.assign(flows.data(), flows.data() + flows.size());
    row.p_total = nonlinear_power(model, x, dq).sum();
    row.abs_error = std::abs(row.p_total - row.p_ref);
    row.iterations = res.total_iterations;
    row.phases = res.phases;
    row.messages = res.total_traffic.messages;
    row.scalars = res.total_traffic.scalars;
    row.bits = res.total_traffic.bits;
    {
      double e2 = 0.0;
      Eigen::Index off = 0;
      for (int i = 0; i < m; ++i) {
        const int n = model.subsystems[i].states();
        e2 += (t_blocks[i] * x.segment(off, n) - x0[i]).squaredNorm();
        off += n;
      }
      row.estimate_error = std::sqrt(e2);
    }

    observer_step(bank, dq, y);
    x = a * x + b * dq;
    if (config.noise) {
      for (Eigen::Index s = 0; s < x.size(); ++s) {
        x[s] += config.process_noise * x_ss_abs[s] * process_rng.symmetric();
      }
    }
    const Vector y_next = c * x;
    row.output_margin =
        std::min((y_next - y_lo).minCoeff(), (y_hi - y_next).minCoeff());
    log.steps.push_back(std::move(row));
  }
  return log;
}

std::vector<ComparisonRow> run_comparison_suite(const HpvModel& model,
                                                const SimConfig& config,
                                                const std::vector<Scheme>& schemes) {
  std::vector<ComparisonRow> rows;
  for (Scheme s : schemes) {
    SimConfig c = config;
    c.mpc.scheme = s;
    const ClosedLoopLog log = run_closed_loop(model, c);
    ComparisonRow r;
    r.scheme = s;
    r.mean_abs_error = log.mean_abs_error();
    r.mean_iterations = log.mean_iterations();
    r.total_bits = log.total_bits();
    r.min_output_margin = log.min_output_margin();
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

}  // namespace

std::string log_to_csv(const ClosedLoopLog& log) {
  std::ostringstream os;
  os << "k,p_ref,p_total,abs_error,iterations,phases,messages,scalars,bits,"
        "output_margin,input_margin,max_complementarity,estimate_error";
  for (const auto& n : log.flow_names) os << ",q_" << n;
  const bool local = !log.steps.empty() && !log.steps[0].local_refs.empty();
  if (local) {
    for (const auto& n : log.subsystem_names) os << ",pref_" << n;
  }
  os << "\n";
  for (const auto& r : log.steps) {
    os << r.k << ',' << fmt(r.p_ref) << ',' << fmt(r.p_total) << ','
       << fmt(r.abs_error) << ',' << r.iterations << ',' << r.phases << ','
       << r.messages << ',' << r.scalars << ',' << r.bits << ','
       << fmt(r.output_margin) << ',' << fmt(r.input_margin) << ','
       << fmt(r.max_complementarity) << ',' << fmt(r.estimate_error);
    for (double q : r.flows) os << ',' << fmt(q);
    for (double p : r.local_refs) os << ',' << fmt(p);
    os << "\n";
  }
  return os.str();
}

Json log_summary_json(const ClosedLoopLog& log) {
  return {{"scheme", to_string(log.scheme)},
          {"seed", log.seed},
          {"steps", log.steps.size()},
          {"mean_abs_error_mw", log.mean_abs_error()},
          {"mean_iterations", log.mean_iterations()},
          {"total_messages", log.total_messages()},
          {"total_scalars", log.total_scalars()},
          {"total_bits", log.total_bits()},
          {"scalars_per_iteration", log.scalars_per_iteration()},
          {"min_output_margin_m", log.min_output_margin()},
          {"min_input_margin", log.min_input_margin()},
          {"max_complementarity", log.max_complementarity()}};
}

Json log_to_json(const ClosedLoopLog& log) {
  Json j = log_summary_json(log);
  j["flow_names"] = log.flow_names;
  j["subsystem_names"] = log.subsystem_names;
  Json rows = Json::array();
  for (const auto& r : log.steps) {
    rows.push_back({{"k", r.k},
                    {"p_ref", r.p_ref},
                    {"p_total", r.p_total},
                    {"abs_error", r.abs_error},
                    {"local_refs", r.local_refs},
                    {"flows", r.flows},
                    {"iterations", r.iterations},
                    {"phases", r.phases},
                    {"messages", r.messages},
                    {"scalars", r.scalars},
                    {"bits", r.bits},
                    {"output_margin", r.output_margin},
                    {"input_margin", r.input_margin},
                    {"raw_input_violation", r.raw_input_violation},
                    {"max_complementarity", r.max_complementarity},
                    {"estimate_error", r.estimate_error}});
  }
  j["rows"] = std::move(rows);
  return j;
}

Json comparison_to_json(const std::vector<ComparisonRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"scheme", to_string(r.scheme)},
                   {"mean_abs_error_mw", r.mean_abs_error},
                   {"mean_iterations", r.mean_iterations},
                   {"total_bits", r.total_bits},
                   {"min_output_margin_m", r.min_output_margin}});
  }
  return out;
}

}  // namespace hpv
