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
/// \file hpv_model.hpp
///
/// Synthetic hydro power valley: lakes and river reaches joined by dams and
/// ducts. Each reach is a staggered grid of `cells` cells with levels at the
/// cell boundaries and flows inside the cells:
///
///   a_n dh_n/dt = f_n - f_{n+1} + (flows entering node n)
///   df_c/dt     = kappa (h_{c-1} - h_c) - phi f_c,   kappa = g * width * depth / dz
///
/// Lakes are single integrators. Subsystems couple only through manipulated
/// flows, so the state matrix is block diagonal. All states are deviations
/// from the steady state; levels are measured from the bed.
///
#ifndef HPV_HPV_MODEL_HPP
#define HPV_HPV_MODEL_HPP

#include <string>
#include <vector>

#include "hpv/bnb.hpp"
#include "hpv/problem_core.hpp"

namespace hpv {

struct LakeSpec {
  std::string name;
  int subsystem = 0;
  double area = 1e6;   // m^2
  double bed = 0.0;    // m above datum
  double depth = 10;   // steady-state water depth, m
  double level_bound = 3.0;  // admissible deviation of the level, m
};

struct ReachSpec {
  std::string name;
  int subsystem = 0;
  double length = 1e4;     // m
  double width = 100.0;    // m
  double depth = 6.0;      // steady-state depth, m
  double bed_up = 0.0;     // bed elevation at node 0, m
  double bed_down = 0.0;   // bed elevation at the last node, m
  double friction = 0.01;  // linearized friction, 1/s
  double level_bound = 0.6;  // admissible deviation of the end level, m
};

/// Passive duct between two lakes of the same subsystem:
/// flow into lake_a = coefficient * (h_b - h_a).
struct PassiveLink {
  int lake_a = 0;
  int lake_b = 1;
  double coefficient = 50.0;  // m^2/s
};

struct Endpoint {
  enum class Kind { kLake, kReachNode, kSink };
  Kind kind = Kind::kSink;
  int index = 0;  // lake or reach index
  int node = 0;   // reach node
  double sink_level = 0.0;  // water level of a sink, m above datum
};

enum class InputKind { kDam, kTurbine, kReversible };

/// Manipulated flow from `from` to `to`; positive flow runs the turbine.
struct InputSpec {
  std::string name;
  InputKind kind = InputKind::kDam;
  int owner = 0;
  Endpoint from, to;
  double k_turbine = 8.63e-3;  // MW per (m^3/s * m)
  double k_pump = 1.115e-2;    // reversible ducts only
  double q_max = 0.0;          // turbine direction, absolute m^3/s
  double q_min = 0.0;          // for dams and turbines, absolute m^3/s
  double pump_max = 0.0;       // reversible ducts only
};

struct InflowSpec {
  int reach = 0;
  int node = 0;
  double flow = 0.0;  // m^3/s
};

struct HpvParams {
  double ts = 1800.0;
  double gravity = 9.81;
  int cells = 20;
  std::vector<std::string> subsystem_names;
  std::vector<LakeSpec> lakes;
  std::vector<ReachSpec> reaches;
  std::vector<PassiveLink> links;
  std::vector<InputSpec> inputs;
  std::vector<InflowSpec> inflows;
  std::vector<int> reduced_orders;  // per subsystem; empty = keep minimal
};

/// Default eight-subsystem valley with 249 states, 10 inputs, 9 outputs.
HpvParams default_params();

/// Two reaches joined by one dam; used as a small fixture.
HpvParams chain_params();

struct StateRef {
  int subsystem = 0;
  int local = 0;  // index inside the subsystem's state
};

struct HpvTopology {
  struct Subsystem {
    std::string name;
    bool is_reach = false;
    int reach = -1;            // reach index when is_reach
    std::vector<int> lakes;    // lake indices otherwise
    int states = 0;
    std::vector<int> outputs;  // local state indices that are measured
    std::vector<int> owned_inputs;
  };
  std::vector<Subsystem> subsystems;
  std::vector<InputSpec> inputs;
  std::vector<std::string> output_names;
  Neighborhoods neighborhoods;  // from input attachments

  int num_states() const;
  int num_outputs() const;
  int state_offset(int i) const;
  /// Level state of an endpoint; subsystem = -1 for a sink.
  StateRef level_state(const Endpoint& e) const;
};

/// Validates the parameters and derives layout and neighborhoods.
/// Throws std::invalid_argument on malformed input.
HpvTopology build_topology(const HpvParams& params);

struct SubsystemModel {
  int index = 0;
  std::string name;
  // Continuous and zero-order-hold discrete matrices. B has one column per
  // model input (10 physical, 12 after augmentation).
  Matrix Ac, Bc, C;
  Matrix A, B;
  Vector x_ss;  // steady-state depths and flows
  Vector y_ss;
  Vector y_lower, y_upper;  // deviation bounds on the outputs
  // Reduced model: xr = T x, x ~ T_inv xr.
  Matrix Ar, Br, Cr, T, T_inv;
  Vector hankel_singular_values;
  int unit_modes = 0;
  int minimal_order = 0;
  bool reduced = false;

  int states() const { return static_cast<int>(A.rows()); }
  int reduced_states() const { return static_cast<int>(Ar.rows()); }
};

struct ModelInput {
  std::string name;
  int owner = 0;
  int physical = 0;    // index of the physical flow it drives
  double sign = 1.0;   // +1 turbine direction, -1 pump part
  double q_ss = 0.0;   // steady state, absolute
  double lower = 0.0;  // deviation bounds
  double upper = 0.0;
  bool pump_part = false;
};

struct HpvModel {
  HpvParams params;
  HpvTopology topology;
  std::vector<SubsystemModel> subsystems;
  std::vector<ModelInput> inputs;  // current input set
  std::vector<VirtualFlowPair> virtual_pairs;  // indices into `inputs`
  bool augmented = false;
  Vector q_ss_physical;

  int num_inputs() const { return static_cast<int>(inputs.size()); }
  /// Physical flows (deviation) produced by model inputs (deviation).
  Matrix input_to_physical() const;
  std::vector<int> owned_inputs(int subsystem) const;
  /// Stacked full-order matrices.
  Matrix full_A() const;
  Matrix full_B() const;
  Matrix full_C() const;
  Vector full_x_ss() const;
  int reduced_order_total() const;
};

/// Continuous model of every subsystem with steady state and bounds.
HpvModel synthesize_linear_model(const HpvParams& params);

/// Exact zero-order hold of every subsystem.
void discretize_zoh(HpvModel& model, double ts);

/// Per-subsystem balanced truncation. The observability Gramian uses the
/// measured outputs plus every level that enters a power expression.
/// orders empty = params.reduced_orders, or minimal order if that is empty.
void reduce_model(HpvModel& model, const std::vector<int>& orders = {});

/// Single-subsystem truncation helper behind reduce_model.
void balanced_truncate(SubsystemModel& sub, const Matrix& extra_outputs,
                       int target_order);

/// Splits each reversible duct column into turbine (+) and pump (-) columns
/// with nonnegative bounds. Pair weights and alpha are filled in later.
void augment_virtual_flows(HpvModel& model);

/// Default pipeline: synthesize, discretize, augment, reduce.
HpvModel build_default_model(const HpvParams& params);

///
/// Affine power map p_hat = offsets + state_coeffs * dx + input_coeffs * dq
/// in MW, one row per subsystem, over full-order deviation states and the
/// model's current inputs.
///
struct PowerMap {
  Matrix state_coeffs;
  Matrix input_coeffs;
  Vector offsets;  // steady-state power per subsystem

  /// state_coeffs * blockdiag(T_inv): coefficients on the reduced states.
  Matrix reduced_state_coeffs(const HpvModel& model) const;
  Vector evaluate(const Vector& dx, const Vector& dq) const;
};

PowerMap linearize_power(const HpvModel& model);

/// Nonlinear power k q dx per structure with the direction-dependent
/// coefficient of reversible ducts. dx, dq are deviations.
Vector nonlinear_power(const HpvModel& model, const Vector& dx,
                       const Vector& dq);

/// Step responses of full and reduced model, per subsystem and output:
/// relative 2-norm error over `steps` samples, stacked over all inputs.
std::vector<std::vector<double>> step_response_errors(const HpvModel& model,
                                                      int steps = 48);

}  // namespace hpv

#endif  // HPV_HPV_MODEL_HPP
