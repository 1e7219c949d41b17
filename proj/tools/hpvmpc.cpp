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

// hpvmpc: closed-loop runs, single QP solves and model reduction.
//
//   hpvmpc simulate [--scenario F] [--scheme S | --compare all] [--steps N]
//                   [--seed U] [--fixed-iters N] [--tol T] [--out DIR]
//   hpvmpc solve --problem F [--fixed-iters N] [--tol T] [--centralized-check]
//   hpvmpc reduce [--params F] [--order default|full|N] [--out DIR]
//   hpvmpc export-qp [--scenario F] [--horizon N] [--out FILE]
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error. Failures
// print one JSON object {"error", "exit_code", ...} on stderr.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hpv/bnb.hpp"
#include "hpv/dist_solver.hpp"
#include "hpv/hpv_model.hpp"
#include "hpv/json_io.hpp"
#include "hpv/model_io.hpp"
#include "hpv/mpc_builder.hpp"
#include "hpv/scenario.hpp"
#include "hpv/sim_harness.hpp"

namespace fs = std::filesystem;
using namespace hpv;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kConfig = 2;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

int fail(int code, const std::string& what, Json extra = Json::object()) {
  extra["error"] = what;
  extra["exit_code"] = code;
  std::cerr << extra.dump() << "\n";
  return code;
}

struct SolverFlags {
  int fixed_iters = 0;
  double tol = 0.0;  // 0 keeps the default
  int max_iters = 0;
  int workers = 0;

  void apply(StoppingRule& stop, int& workers_out) const {
    if (fixed_iters < 0) throw ConfigError("--fixed-iters must be > 0");
    if (fixed_iters > 0) {
      stop.mode = StoppingRule::Mode::kFixedIterations;
      stop.fixed_iterations = fixed_iters;
    }
    if (tol < 0.0) throw ConfigError("--tol must be > 0");
    if (tol > 0.0) {
      stop.eps_eq = tol;
      stop.eps_ineq = tol;
    }
    if (max_iters < 0) throw ConfigError("--max-iters must be > 0");
    if (max_iters > 0) stop.max_iterations = max_iters;
    if (workers < 0) throw ConfigError("--workers must be > 0");
    if (workers > 0) workers_out = workers;
  }
};

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  app->add_option("--fixed-iters", f.fixed_iters,
                  "run exactly N solver iterations per solve");
  app->add_option("--tol", f.tol, "equality/inequality residual tolerance");
  app->add_option("--max-iters", f.max_iters, "iteration cap");
  app->add_option("--workers", f.workers, "solver worker threads");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
}

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string scheme;
  std::string compare;
  int steps = 0;
  SolverFlags solver;
};

void print_rows(const std::vector<ComparisonRow>& rows) {
  std::cout << std::left << std::setw(16) << "scheme" << std::right
            << std::setw(12) << "mae_mw" << std::setw(14) << "mean_iters"
            << std::setw(16) << "bits" << std::setw(14) << "min_margin_m"
            << "\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(16) << to_string(r.scheme) << std::right
              << std::fixed << std::setprecision(4) << std::setw(12)
              << r.mean_abs_error << std::setprecision(1) << std::setw(14)
              << r.mean_iterations << std::setw(16) << r.total_bits
              << std::setprecision(4) << std::setw(14) << r.min_output_margin
              << "\n";
  }
  std::cout.unsetf(std::ios::fixed);
}

ComparisonRow row_of(const ClosedLoopLog& log) {
  ComparisonRow r;
  r.scheme = log.scheme;
  r.mean_abs_error = log.mean_abs_error();
  r.mean_iterations = log.mean_iterations();
  r.total_bits = log.total_bits();
  r.min_output_margin = log.min_output_margin();
  return r;
}

int cmd_simulate(const SimulateArgs& a) {
  Scenario sc;
  if (!a.scenario.empty()) sc = load_scenario(a.scenario);
  SimConfig& cfg = sc.config;
  if (a.seed) cfg.seed = *a.seed;
  if (a.steps < 0) throw ConfigError("--steps must be > 0");
  if (a.steps > 0) cfg.steps = a.steps;
  if (!a.scheme.empty()) cfg.mpc.scheme = scheme_from_string(a.scheme);
  a.solver.apply(cfg.stop, cfg.workers);
  std::vector<Scheme> schemes{cfg.mpc.scheme};
  if (!a.compare.empty()) {
    if (a.compare != "all") {
      throw ConfigError("--compare accepts only 'all'");
    }
    if (!a.scheme.empty()) {
      throw ConfigError("--compare and --scheme are exclusive");
    }
    schemes = {Scheme::kGlobalRef, Scheme::kLocRefDyn, Scheme::kLocRefStat,
               Scheme::kDecentralized};
  }
  const HpvModel model = build_default_model(sc.params ? *sc.params
                                                       : default_params());
  ensure_dir(a.out);
  write_text_file(path_in(a.out, "scenario.json"), dump(scenario_to_json(sc)));
  std::vector<ComparisonRow> rows;
  for (Scheme s : schemes) {
    SimConfig c = cfg;
    c.mpc.scheme = s;
    const ClosedLoopLog log = run_closed_loop(model, c);
    const std::string stem = to_string(s);
    write_text_file(path_in(a.out, stem + "_log.csv"), log_to_csv(log));
    write_text_file(path_in(a.out, stem + "_log.json"), dump(log_to_json(log)));
    write_text_file(path_in(a.out, stem + "_summary.json"),
                    dump(log_summary_json(log)));
    rows.push_back(row_of(log));
  }
  if (schemes.size() > 1) {
    write_text_file(path_in(a.out, "comparison.json"),
                    dump(comparison_to_json(rows)));
  }
  print_rows(rows);
  return kOk;
}

// ---- solve -----------------------------------------------------------------

struct SolveArgs {
  std::string problem;
  std::string out;
  bool centralized_check = false;
  double complementarity_tol = 1e-6;
  SolverFlags solver;
};

std::vector<VirtualFlowPair> pairs_from_json(const Json& j,
                                             const PartitionedQP& qp) {
  std::vector<VirtualFlowPair> out;
  if (!j.contains("virtual_pairs")) return out;
  for (const Json& e : j.at("virtual_pairs")) {
    VirtualFlowPair p;
    p.subsystem = e.at("subsystem").get<int>();
    p.step = e.value("step", 0);
    p.turbine_var = e.at("turbine_var").get<int>();
    p.pump_var = e.at("pump_var").get<int>();
    p.r_turbine = e.value("r_turbine", 1.0);
    p.r_pump = e.value("r_pump", 1.0);
    p.alpha = e.value("alpha", 0.9);
    if (p.subsystem < 0 || p.subsystem >= qp.num_subsystems()) {
      throw ConfigError("virtual pair subsystem out of range");
    }
    const int n = qp.partition[p.subsystem];
    if (p.turbine_var < 0 || p.turbine_var >= n || p.pump_var < 0 ||
        p.pump_var >= n || p.pump_var == p.turbine_var) {
      throw ConfigError("virtual pair variable out of range");
    }
    out.push_back(p);
  }
  return out;
}

bool same_bits(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         (a.size() == 0 ||
          std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

struct Trace {
  std::vector<Vector> x;
  std::vector<Vector> dual;
};

SolverOptions tracing(SolverOptions o, Trace& t) {
  o.observer = [&t](int, const std::vector<Vector>& x,
                    const std::vector<DualBlock>& d) {
    t.x.push_back(stack(x));
    std::vector<Vector> parts;
    for (const auto& b : d) {
      parts.push_back(b.lambda);
      parts.push_back(b.mu);
      parts.push_back(b.nu);
    }
    t.dual.push_back(stack(parts));
  };
  return o;
}

int cmd_solve(const SolveArgs& a) {
  Json doc;
  try {
    doc = read_json_file(a.problem);
  } catch (const Json::parse_error& e) {
    throw ConfigError(a.problem + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  PartitionedQP qp;
  try {
    qp = qp_from_json(doc);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  const ValidationReport v = validate_problem(qp);
  if (!v.ok()) {
    Json extra;
    extra["violations"] = v.violations;
    return fail(kConfig, "invalid problem", extra);
  }
  const auto pairs = pairs_from_json(doc, qp);
  TwoPhaseOptions opts;
  opts.tol = a.complementarity_tol;
  a.solver.apply(opts.solver.stop, opts.solver.workers);

  if (a.centralized_check) {
    Trace dist, cent;
    const SolveOutcome d = run_rounds(qp, {}, tracing(opts.solver, dist));
    const SolveOutcome c =
        centralized_reference_run(qp, {}, tracing(opts.solver, cent));
    bool match = dist.x.size() == cent.x.size() && same_bits(d.x, c.x);
    std::size_t k = 0;
    for (; match && k < dist.x.size(); ++k) {
      match = same_bits(dist.x[k], cent.x[k]) &&
              same_bits(dist.dual[k], cent.dual[k]);
    }
    if (!match) {
      std::cout << "MISMATCH at iteration " << (k == 0 ? 0 : k - 1) << "\n";
      return kRuntime;
    }
    std::cout << "MATCH (" << dist.x.size() << " iterations)\n";
    return kOk;
  }

  const TwoPhaseResult res = two_phase_solve(qp, pairs, opts);
  const KktReport kkt = kkt_residuals(res.solved_problem, res.outcome.x,
                                      res.outcome.x_aux, res.outcome.duals);
  Json j = two_phase_to_json(res);
  j["kkt"] = kkt_to_json(kkt);
  j["complementarity_violations"] =
      complementarity_violations(qp, res.outcome.x, pairs, opts.tol).size();
  if (!a.out.empty()) {
    ensure_dir(a.out);
    write_text_file(path_in(a.out, "solution.json"), dump(j));
    write_text_file(path_in(a.out, "history.csv"),
                    outcome_history_csv(res.outcome));
  } else {
    std::cout << dump(j);
  }
  std::cerr << "iterations " << res.total_iterations << " phases "
            << res.phases << " termination " << to_string(res.outcome.reason)
            << " kkt_max " << kkt.max() << "\n";
  return kOk;
}

// ---- export-qp -------------------------------------------------------------

struct ExportArgs {
  std::string scenario;
  std::string out;
  int horizon = 0;
};

// MPC problem at the steady state, first sample of the scenario's reference.
int cmd_export(const ExportArgs& a) {
  Scenario sc;
  if (!a.scenario.empty()) sc = load_scenario(a.scenario);
  SimConfig& cfg = sc.config;
  if (a.horizon < 0) throw ConfigError("--horizon must be > 0");
  if (a.horizon > 0) cfg.mpc.horizon = a.horizon;
  const HpvModel model = build_default_model(sc.params ? *sc.params
                                                       : default_params());
  const PowerMap pm = linearize_power(model);
  std::vector<double> ref = cfg.reference;
  if (ref.empty()) {
    ref = default_reference(pm.offsets.sum(), cfg.mpc.horizon, model.params.ts,
                            cfg.reference_amplitude);
  }
  if (static_cast<int>(ref.size()) < cfg.mpc.horizon) {
    throw ConfigError("reference shorter than the horizon");
  }
  ref.resize(cfg.mpc.horizon);
  std::vector<Vector> x0;
  for (const auto& s : model.subsystems) {
    x0.push_back(Vector::Zero(s.reduced_states()));
  }
  const MpcProblem p = build_qp(model, cfg.mpc, ref, x0);
  Json j = qp_to_json(p.qp);
  Json pairs = Json::array();
  for (const auto& v : p.pairs) {
    pairs.push_back({{"subsystem", v.subsystem},
                     {"step", v.step},
                     {"turbine_var", v.turbine_var},
                     {"pump_var", v.pump_var},
                     {"r_turbine", v.r_turbine},
                     {"r_pump", v.r_pump},
                     {"alpha", v.alpha}});
  }
  j["virtual_pairs"] = std::move(pairs);
  if (a.out.empty()) {
    std::cout << j.dump() << "\n";
  } else {
    write_text_file(a.out, j.dump() + "\n");
  }
  return kOk;
}

// ---- reduce ----------------------------------------------------------------

struct ReduceArgs {
  std::string params;
  std::string order = "default";
  std::string out;
  int steps = 48;
};

int cmd_reduce(const ReduceArgs& a) {
  HpvParams params = default_params();
  if (!a.params.empty()) {
    try {
      params = params_from_json(read_json_file(a.params));
    } catch (const Json::exception& e) {
      throw ConfigError(a.params + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  }
  if (a.steps <= 0) throw ConfigError("--steps must be > 0");
  HpvModel base = synthesize_linear_model(params);
  discretize_zoh(base, params.ts);
  augment_virtual_flows(base);

  HpvModel model = base;
  if (a.order == "default") {
    reduce_model(model);
  } else {
    // Learn the minimal orders first; "full" keeps them, N is clamped to
    // [unit modes, minimal order] per subsystem.
    HpvModel probe = base;
    probe.params.reduced_orders.clear();
    reduce_model(probe);
    std::vector<int> orders;
    int n = -1;
    if (a.order != "full") {
      std::size_t used = 0;
      try {
        n = std::stoi(a.order, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != a.order.size() || n < 1) {
        throw ConfigError("--order must be default, full or a positive integer");
      }
    }
    for (const auto& s : probe.subsystems) {
      orders.push_back(n < 0 ? s.minimal_order
                             : std::max(s.unit_modes,
                                        std::min(n, s.minimal_order)));
    }
    reduce_model(model, orders);
  }
  const Json report = reduction_report(model, a.steps);
  if (!a.out.empty()) {
    ensure_dir(a.out);
    write_text_file(path_in(a.out, "reduced_model.json"),
                    dump(model_to_json(model)));
    write_text_file(path_in(a.out, "reduction_report.json"), dump(report));
  }
  std::cout << "total reduced order: " << report["total_reduced_order"] << "\n";
  std::cout << std::left << std::setw(8) << "name" << std::right
            << std::setw(6) << "full" << std::setw(9) << "reduced"
            << std::setw(14) << "max_step_err" << "\n";
  for (const Json& s : report["subsystems"]) {
    double worst = 0.0;
    for (const Json& e : s["step_response_error"]) {
      worst = std::max(worst, e.get<double>());
    }
    std::cout << std::left << std::setw(8) << s["name"].get<std::string>()
              << std::right << std::setw(6) << s["full_order"].get<int>()
              << std::setw(9) << s["reduced_order"].get<int>()
              << std::setw(14) << std::scientific << std::setprecision(3)
              << worst << std::defaultfloat << "\n";
  }
  std::cout << "max step-response error: "
            << report["max_step_response_error"].get<double>() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed MPC for a hydro power valley"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* s = app.add_subcommand("simulate", "closed-loop simulation");
  s->add_option("--scenario", sim.scenario, "scenario JSON");
  s->add_option("--out", sim.out, "artifact directory");
  s->add_option("--seed", sim.seed, "noise seed");
  s->add_option("--scheme", sim.scheme,
                "global-ref, loc-ref-stat, loc-ref-dyn or decentralized");
  s->add_option("--compare", sim.compare, "'all' runs every scheme");
  s->add_option("--steps", sim.steps, "closed-loop samples");
  add_solver_flags(s, sim.solver);

  SolveArgs sol;
  CLI::App* q = app.add_subcommand("solve", "two-phase solve of one QP");
  q->add_option("--problem,--scenario", sol.problem, "problem JSON")->required();
  q->add_option("--out", sol.out, "write solution.json and history.csv here");
  q->add_flag("--centralized-check", sol.centralized_check,
              "compare distributed and centralized iterates bit by bit");
  q->add_option("--complementarity-tol", sol.complementarity_tol,
                "q_T q_P threshold for the second phase");
  add_solver_flags(q, sol.solver);

  ReduceArgs red;
  CLI::App* r = app.add_subcommand("reduce", "balanced truncation report");
  r->add_option("--params,--scenario", red.params, "valley parameter JSON");
  r->add_option("--order", red.order, "default, full or N per subsystem");
  r->add_option("--out", red.out, "write reduced_model.json here");
  r->add_option("--steps", red.steps, "step-response horizon");

  ExportArgs ex;
  CLI::App* e = app.add_subcommand("export-qp", "write the MPC QP at steady state");
  e->add_option("--scenario", ex.scenario, "scenario JSON");
  e->add_option("--horizon", ex.horizon, "override the horizon");
  e->add_option("--out", ex.out, "output file (stdout if empty)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kConfig, e.what());
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (q->parsed()) return cmd_solve(sol);
    if (e->parsed()) return cmd_export(ex);
    return cmd_reduce(red);
  } catch (const SimulationError& e) {
    Json extra;
    extra["step"] = e.step();
    return fail(kRuntime, e.what(), extra);
  } catch (const SolverDivergence& e) {
    Json extra;
    extra["iteration"] = e.iteration();
    return fail(kRuntime, e.what(), extra);
  } catch (const std::invalid_argument& e) {
    return fail(kConfig, e.what());
  } catch (const std::exception& e) {
    return fail(kRuntime, e.what());
  }
}
