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
/// \file sim_harness.hpp
///
/// Closed loop: full-order plant with bounded uniform noise, per-subsystem
/// observers, one two-phase distributed solve per sample.
///
#ifndef HPV_SIM_HARNESS_HPP
#define HPV_SIM_HARNESS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpv/dist_solver.hpp"
#include "hpv/hpv_model.hpp"
#include "hpv/json_io.hpp"
#include "hpv/mpc_builder.hpp"

namespace hpv {

/// splitmix64; value n of a stream depends only on (seed, n).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform on [-1, 1].
  double symmetric();

 private:
  std::uint64_t state_;
};

/// 24 h periodic piecewise-linear profile around steady_total, night trough
/// at 04:00 and morning peak at 11:00, spanning +-amplitude.
std::vector<double> default_reference(double steady_total, int samples,
                                      double ts, double amplitude = 0.3);

struct SimConfig {
  MpcScenario mpc;
  int steps = 48;
  std::uint64_t seed = 7;
  bool noise = true;
  double process_noise = 0.01;      // fraction of |x_ss|
  double measurement_noise = 0.03;  // m
  double reference_amplitude = 0.3;
  std::vector<double> reference;  // MW per sample; overrides the profile
  StoppingRule stop;
  double complementarity_tol = 1e-6;
  int workers = 1;
};

struct StepLog {
  int k = 0;
  double p_ref = 0.0;
  double p_total = 0.0;  // nonlinear power of the plant, MW
  double abs_error = 0.0;
  std::vector<double> local_refs;  // empty for GLOBAL-REF
  std::vector<double> flows;       // applied physical flows, m^3/s
  int iterations = 0;
  int phases = 1;
  std::int64_t messages = 0;
  std::int64_t scalars = 0;
  std::int64_t bits = 0;
  double output_margin = 0.0;  // min distance of the true levels at k+1 to their box
  double input_margin = 0.0;   // min distance of the applied inputs to their box
  double raw_input_violation = 0.0;  // before saturation
  double max_complementarity = 0.0;  // max q_T q_P over the solution
  double estimate_error = 0.0;       // |T x - xh| over all subsystems
};

struct ClosedLoopLog {
  Scheme scheme = Scheme::kLocRefDyn;
  std::uint64_t seed = 0;
  std::vector<std::string> flow_names;
  std::vector<std::string> subsystem_names;
  std::vector<StepLog> steps;

  double mean_abs_error() const;
  double mean_iterations() const;
  double min_output_margin() const;
  double min_input_margin() const;
  double max_complementarity() const;
  std::int64_t total_messages() const;
  std::int64_t total_scalars() const;
  std::int64_t total_bits() const;
  /// Exchanged scalars per solver iteration, averaged over the run.
  double scalars_per_iteration() const;
};

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, int step)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Runs config.steps samples from the steady state. Deterministic in
/// (model, config). Throws SimulationError when a solve fails.
ClosedLoopLog run_closed_loop(const HpvModel& model, const SimConfig& config);

/// vars * bits * iterations * solves. Throws std::invalid_argument unless
/// all counts are positive.
std::int64_t communication_accounting(std::int64_t vars_per_iteration,
                                      std::int64_t bits_per_var,
                                      std::int64_t iterations,
                                      std::int64_t solves_per_step);

struct ComparisonRow {
  Scheme scheme = Scheme::kGlobalRef;
  double mean_abs_error = 0.0;
  double mean_iterations = 0.0;
  std::int64_t total_bits = 0;
  double min_output_margin = 0.0;
};

std::vector<ComparisonRow> run_comparison_suite(const HpvModel& model,
                                                const SimConfig& config,
                                                const std::vector<Scheme>& schemes);

/// One row per step. Columns: k, p_ref, p_total, abs_error, iterations,
/// phases, messages, scalars, bits, output_margin, input_margin,
/// max_complementarity, estimate_error, q_<flow>..., pref_<subsystem>...
std::string log_to_csv(const ClosedLoopLog& log);
Json log_to_json(const ClosedLoopLog& log);
Json log_summary_json(const ClosedLoopLog& log);
Json comparison_to_json(const std::vector<ComparisonRow>& rows);

}  // namespace hpv

#endif  // HPV_SIM_HARNESS_HPP
