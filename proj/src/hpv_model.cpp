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

#include "hpv/hpv_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "hpv/linear_systems.hpp"

namespace hpv {
namespace {

constexpr double kDamK = 8.63e-3;   // rho g eta / 1e6 with eta = 0.88
constexpr double kPumpK = 1.115e-2;  // rho g / (eta_p 1e6) with eta_p = 0.88

Endpoint lake_end(int lake) {
  Endpoint e;
  e.kind = Endpoint::Kind::kLake;
  e.index = lake;
  return e;
}

Endpoint reach_end(int reach, int node) {
  Endpoint e;
  e.kind = Endpoint::Kind::kReachNode;
  e.index = reach;
  e.node = node;
  return e;
}

Endpoint sink_end(double level) {
  Endpoint e;
  e.kind = Endpoint::Kind::kSink;
  e.sink_level = level;
  return e;
}

InputSpec dam(const std::string& name, int owner, Endpoint from, Endpoint to,
              double q_min, double q_max) {
  InputSpec in;
  in.name = name;
  in.kind = InputKind::kDam;
  in.owner = owner;
  in.from = from;
  in.to = to;
  in.k_turbine = kDamK;
  in.q_min = q_min;
  in.q_max = q_max;
  return in;
}

InputSpec duct(const std::string& name, InputKind kind, int owner, Endpoint from,
               Endpoint to, double q_max, double pump_max) {
  InputSpec in;
  in.name = name;
  in.kind = kind;
  in.owner = owner;
  in.from = from;
  in.to = to;
  in.k_turbine = kDamK;
  in.k_pump = kPumpK;
  in.q_min = 0.0;
  in.q_max = q_max;
  in.pump_max = pump_max;
  return in;
}

double reach_bed(const ReachSpec& r, int node, int cells) {
  return r.bed_up + (r.bed_down - r.bed_up) * node / cells;
}

double steady_level(const HpvParams& p, const Endpoint& e) {
  switch (e.kind) {
    case Endpoint::Kind::kLake:
      return p.lakes[e.index].bed + p.lakes[e.index].depth;
    case Endpoint::Kind::kReachNode: {
      const ReachSpec& r = p.reaches[e.index];
      return reach_bed(r, e.node, p.cells) + r.depth;
    }
    case Endpoint::Kind::kSink:
      return e.sink_level;
  }
  return 0.0;
}

// Steady flows of every physical input: dams pass the total inflow of their
// reach, ducts are idle.
Vector steady_input_flows(const HpvParams& p) {
  const int nu = static_cast<int>(p.inputs.size());
  Vector q = Vector::Zero(nu);
  for (int pass = 0; pass <= static_cast<int>(p.reaches.size()); ++pass) {
    for (int u = 0; u < nu; ++u) {
      const InputSpec& in = p.inputs[u];
      if (in.kind != InputKind::kDam) continue;
      const int reach = in.from.index;
      double total = 0.0;
      for (const auto& f : p.inflows) {
        if (f.reach == reach) total += f.flow;
      }
      for (int v = 0; v < nu; ++v) {
        const auto& to = p.inputs[v].to;
        if (to.kind == Endpoint::Kind::kReachNode && to.index == reach) {
          total += q[v];
        }
      }
      q[u] = total;
    }
  }
  return q;
}

}  // namespace

HpvParams default_params() {
  HpvParams p;
  p.subsystem_names = {"S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8"};
  p.lakes = {
      {"L1", 0, 2.0e6, 250.0, 10.0, 3.0},
      {"L2", 0, 4.0e6, 250.0, 10.0, 3.0},
      {"L3", 1, 3.0e6, 215.0, 10.0, 3.0},
  };
  // Dam heads (end level of R_i minus start level of R_{i+1}) are 14-16 m.
  p.reaches = {
      {"R1", 2, 1e4, 100.0, 6.0, 200.0, 199.0, 0.01, 0.6},
      {"R2", 3, 1e4, 100.0, 6.0, 184.0, 183.0, 0.01, 0.6},
      {"R3", 4, 1e4, 120.0, 7.0, 168.0, 167.0, 0.01, 0.6},
      {"R4", 5, 1e4, 120.0, 6.5, 152.0, 151.0, 0.01, 0.6},
      {"R5", 6, 1e4, 120.0, 6.0, 137.0, 136.0, 0.01, 0.6},
      {"R6", 7, 1e4, 120.0, 5.5, 120.5, 119.5, 0.01, 0.6},
  };
  p.links = {{0, 1, 50.0}};
  const int n = p.cells;
  p.inputs = {
      dam("D1", 2, reach_end(0, n), reach_end(1, 0), 40.0, 170.0),
      dam("D2", 3, reach_end(1, n), reach_end(2, 0), 40.0, 170.0),
      dam("D3", 4, reach_end(2, n), reach_end(3, 0), 60.0, 230.0),
      dam("D4", 5, reach_end(3, n), reach_end(4, 0), 60.0, 230.0),
      dam("D5", 6, reach_end(4, n), reach_end(5, 0), 60.0, 230.0),
      dam("D6", 7, reach_end(5, n), sink_end(110.0), 60.0, 230.0),
      duct("T1", InputKind::kTurbine, 0, lake_end(0), reach_end(1, n / 2), 40.0,
           0.0),
      duct("T2", InputKind::kTurbine, 1, lake_end(2), reach_end(4, n / 2), 40.0,
           0.0),
      duct("C1", InputKind::kReversible, 0, lake_end(0), reach_end(0, n / 2),
           30.0, 30.0),
      duct("C2", InputKind::kReversible, 1, lake_end(2), reach_end(3, n / 2),
           30.0, 30.0),
  };
  p.inflows = {{0, 0, 100.0}, {2, n / 2, 40.0}};
  p.reduced_orders = {2, 1, 5, 5, 5, 5, 5, 4};
  return p;
}

HpvParams chain_params() {
  HpvParams p;
  p.subsystem_names = {"A", "B"};
  p.reaches = {
      {"RA", 0, 1e4, 100.0, 6.0, 100.0, 99.0, 0.01, 0.6},
      {"RB", 1, 1e4, 100.0, 6.0, 84.0, 83.0, 0.01, 0.6},
  };
  const int n = p.cells;
  p.inputs = {
      dam("DA", 0, reach_end(0, n), reach_end(1, 0), 40.0, 170.0),
      dam("DB", 1, reach_end(1, n), sink_end(75.0), 40.0, 170.0),
  };
  p.inflows = {{0, 0, 100.0}};
  p.reduced_orders = {4, 4};
  return p;
}

int HpvTopology::num_states() const {
  int n = 0;
  for (const auto& s : subsystems) n += s.states;
  return n;
}

int HpvTopology::num_outputs() const {
  int n = 0;
  for (const auto& s : subsystems) n += static_cast<int>(s.outputs.size());
  return n;
}

int HpvTopology::state_offset(int i) const {
  int n = 0;
  for (int k = 0; k < i; ++k) n += subsystems[k].states;
  return n;
}

StateRef HpvTopology::level_state(const Endpoint& e) const {
  switch (e.kind) {
    case Endpoint::Kind::kLake:
      for (int i = 0; i < static_cast<int>(subsystems.size()); ++i) {
        const auto& l = subsystems[i].lakes;
        auto it = std::find(l.begin(), l.end(), e.index);
        if (it != l.end()) {
          return {i, static_cast<int>(it - l.begin())};
        }
      }
      break;
    case Endpoint::Kind::kReachNode:
      for (int i = 0; i < static_cast<int>(subsystems.size()); ++i) {
        if (subsystems[i].is_reach && subsystems[i].reach == e.index) {
          return {i, e.node};
        }
      }
      break;
    case Endpoint::Kind::kSink:
      return {-1, 0};
  }
  throw std::invalid_argument("endpoint does not belong to any subsystem");
}

HpvTopology build_topology(const HpvParams& p) {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("hpv parameters: " + msg);
  };
  const int m = static_cast<int>(p.subsystem_names.size());
  if (m == 0) fail("no subsystems");
  if (!(p.ts > 0.0)) fail("ts must be positive");
  if (p.cells < 1) fail("cells must be >= 1");
  if (!(p.gravity > 0.0)) fail("gravity must be positive");

  HpvTopology topo;
  topo.subsystems.resize(m);
  for (int i = 0; i < m; ++i) topo.subsystems[i].name = p.subsystem_names[i];

  for (int l = 0; l < static_cast<int>(p.lakes.size()); ++l) {
    const LakeSpec& lk = p.lakes[l];
    if (lk.subsystem < 0 || lk.subsystem >= m) fail("lake subsystem index");
    if (!(lk.area > 0.0)) fail("lake " + lk.name + " area must be positive");
    if (!(lk.depth > 0.0)) fail("lake " + lk.name + " depth must be positive");
    topo.subsystems[lk.subsystem].lakes.push_back(l);
  }
  for (int r = 0; r < static_cast<int>(p.reaches.size()); ++r) {
    const ReachSpec& rc = p.reaches[r];
    if (rc.subsystem < 0 || rc.subsystem >= m) fail("reach subsystem index");
    if (!(rc.length > 0.0) || !(rc.width > 0.0) || !(rc.depth > 0.0)) {
      fail("reach " + rc.name + " geometry must be positive");
    }
    if (!(rc.friction > 0.0)) fail("reach " + rc.name + " friction must be positive");
    auto& s = topo.subsystems[rc.subsystem];
    if (s.is_reach) fail("subsystem " + s.name + " has two reaches");
    s.is_reach = true;
    s.reach = r;
  }
  for (int i = 0; i < m; ++i) {
    auto& s = topo.subsystems[i];
    if (s.is_reach && !s.lakes.empty()) {
      fail("subsystem " + s.name + " mixes lakes and a reach");
    }
    if (!s.is_reach && s.lakes.empty()) fail("subsystem " + s.name + " is empty");
    if (s.is_reach) {
      s.states = 2 * p.cells + 1;
      s.outputs = {p.cells};
      topo.output_names.push_back("h_" + p.reaches[s.reach].name);
    } else {
      s.states = static_cast<int>(s.lakes.size());
      for (int k = 0; k < s.states; ++k) {
        s.outputs.push_back(k);
        topo.output_names.push_back("h_" + p.lakes[s.lakes[k]].name);
      }
    }
  }
  for (const auto& lnk : p.links) {
    const int nl = static_cast<int>(p.lakes.size());
    if (lnk.lake_a < 0 || lnk.lake_a >= nl || lnk.lake_b < 0 ||
        lnk.lake_b >= nl || lnk.lake_a == lnk.lake_b) {
      fail("link lake index");
    }
    if (p.lakes[lnk.lake_a].subsystem != p.lakes[lnk.lake_b].subsystem) {
      fail("passive links must stay inside one subsystem");
    }
    if (!(lnk.coefficient > 0.0)) fail("link coefficient must be positive");
  }
  auto check_end = [&](const Endpoint& e) {
    if (e.kind == Endpoint::Kind::kLake &&
        (e.index < 0 || e.index >= static_cast<int>(p.lakes.size()))) {
      fail("endpoint lake index");
    }
    if (e.kind == Endpoint::Kind::kReachNode &&
        (e.index < 0 || e.index >= static_cast<int>(p.reaches.size()) ||
         e.node < 0 || e.node > p.cells)) {
      fail("endpoint reach node");
    }
  };
  topo.neighborhoods.assign(m, {});
  for (int i = 0; i < m; ++i) topo.neighborhoods[i].insert(i);
  for (int u = 0; u < static_cast<int>(p.inputs.size()); ++u) {
    const InputSpec& in = p.inputs[u];
    if (in.owner < 0 || in.owner >= m) fail("input " + in.name + " owner");
    check_end(in.from);
    check_end(in.to);
    if (in.from.kind == Endpoint::Kind::kSink) {
      fail("input " + in.name + " cannot draw from a sink");
    }
    if (!(in.k_turbine > 0.0)) fail("input " + in.name + " needs k_turbine > 0");
    if (in.kind == InputKind::kReversible && !(in.k_pump > 0.0)) {
      fail("input " + in.name + " needs k_pump > 0");
    }
    if (in.kind == InputKind::kDam &&
        !(in.from.kind == Endpoint::Kind::kReachNode &&
          in.from.node == p.cells)) {
      fail("dam " + in.name + " must draw from the last node of a reach");
    }
    if (in.q_max < in.q_min) fail("input " + in.name + " has q_max < q_min");
    topo.subsystems[in.owner].owned_inputs.push_back(u);
    std::set<int> touched = {in.owner};
    for (const Endpoint* e : {&in.from, &in.to}) {
      const StateRef s = topo.level_state(*e);
      if (s.subsystem >= 0) touched.insert(s.subsystem);
    }
    for (int a : touched) {
      for (int b : touched) topo.neighborhoods[a].insert(b);
    }
  }
  for (const auto& f : p.inflows) {
    if (f.reach < 0 || f.reach >= static_cast<int>(p.reaches.size()) ||
        f.node < 0 || f.node > p.cells) {
      fail("inflow location");
    }
  }
  if (!p.reduced_orders.empty() &&
      static_cast<int>(p.reduced_orders.size()) != m) {
    fail("reduced_orders must have one entry per subsystem");
  }
  topo.inputs = p.inputs;
  return topo;
}

Matrix HpvModel::input_to_physical() const {
  Matrix map = Matrix::Zero(q_ss_physical.size(), num_inputs());
  for (int j = 0; j < num_inputs(); ++j) {
    map(inputs[j].physical, j) = inputs[j].sign;
  }
  return map;
}

std::vector<int> HpvModel::owned_inputs(int subsystem) const {
  std::vector<int> out;
  for (int j = 0; j < num_inputs(); ++j) {
    if (inputs[j].owner == subsystem) out.push_back(j);
  }
  return out;
}

Matrix HpvModel::full_A() const {
  const int n = topology.num_states();
  Matrix a = Matrix::Zero(n, n);
  int off = 0;
  for (const auto& s : subsystems) {
    a.block(off, off, s.states(), s.states()) = s.A;
    off += s.states();
  }
  return a;
}

Matrix HpvModel::full_B() const {
  Matrix b(topology.num_states(), num_inputs());
  int off = 0;
  for (const auto& s : subsystems) {
    b.middleRows(off, s.states()) = s.B;
    off += s.states();
  }
  return b;
}

Matrix HpvModel::full_C() const {
  Matrix c = Matrix::Zero(topology.num_outputs(), topology.num_states());
  int ro = 0, co = 0;
  for (const auto& s : subsystems) {
    c.block(ro, co, s.C.rows(), s.C.cols()) = s.C;
    ro += static_cast<int>(s.C.rows());
    co += s.states();
  }
  return c;
}

Vector HpvModel::full_x_ss() const {
  Vector x(topology.num_states());
  int off = 0;
  for (const auto& s : subsystems) {
    x.segment(off, s.states()) = s.x_ss;
    off += s.states();
  }
  return x;
}

int HpvModel::reduced_order_total() const {
  int n = 0;
  for (const auto& s : subsystems) n += s.reduced_states();
  return n;
}

HpvModel synthesize_linear_model(const HpvParams& params) {
  HpvModel model;
  model.params = params;
  model.topology = build_topology(params);
  const HpvTopology& topo = model.topology;
  const int m = static_cast<int>(topo.subsystems.size());
  const int nu = static_cast<int>(params.inputs.size());
  const int cells = params.cells;
  model.q_ss_physical = steady_input_flows(params);

  for (int i = 0; i < m; ++i) {
    const auto& ts = topo.subsystems[i];
    SubsystemModel sub;
    sub.index = i;
    sub.name = ts.name;
    const int n = ts.states;
    sub.Ac = Matrix::Zero(n, n);
    sub.Bc = Matrix::Zero(n, nu);
    sub.x_ss = Vector::Zero(n);
    Vector node_area;  // per level state

    if (ts.is_reach) {
      const ReachSpec& r = params.reaches[ts.reach];
      const double dz = r.length / cells;
      const double kappa = params.gravity * r.width * r.depth / dz;
      node_area = Vector::Constant(cells + 1, r.width * dz);
      node_area[0] *= 0.5;
      node_area[cells] *= 0.5;
      auto flow = [&](int c) { return cells + c; };  // c = 1..cells
      for (int node = 0; node <= cells; ++node) {
        if (node >= 1) sub.Ac(node, flow(node)) += 1.0 / node_area[node];
        if (node + 1 <= cells) sub.Ac(node, flow(node + 1)) -= 1.0 / node_area[node];
      }
      for (int c = 1; c <= cells; ++c) {
        sub.Ac(flow(c), c - 1) += kappa;
        sub.Ac(flow(c), c) -= kappa;
        sub.Ac(flow(c), flow(c)) -= r.friction;
      }
      // Steady flows: everything entering upstream of a cell passes through it.
      std::vector<double> entering(cells + 1, 0.0);
      for (const auto& f : params.inflows) {
        if (f.reach == ts.reach) entering[f.node] += f.flow;
      }
      for (int u = 0; u < nu; ++u) {
        const Endpoint& to = params.inputs[u].to;
        if (to.kind == Endpoint::Kind::kReachNode && to.index == ts.reach) {
          entering[to.node] += model.q_ss_physical[u];
        }
      }
      double running = 0.0;
      for (int node = 0; node <= cells; ++node) {
        sub.x_ss[node] = r.depth;
        if (node >= 1) sub.x_ss[flow(node)] = running;
        running += entering[node];
      }
    } else {
      node_area.resize(n);
      for (int k = 0; k < n; ++k) {
        const LakeSpec& lk = params.lakes[ts.lakes[k]];
        node_area[k] = lk.area;
        sub.x_ss[k] = lk.depth;
      }
      auto local = [&](int lake) {
        return static_cast<int>(
            std::find(ts.lakes.begin(), ts.lakes.end(), lake) - ts.lakes.begin());
      };
      for (const auto& lnk : params.links) {
        if (params.lakes[lnk.lake_a].subsystem != i) continue;
        const int a = local(lnk.lake_a), b = local(lnk.lake_b);
        sub.Ac(a, a) -= lnk.coefficient / node_area[a];
        sub.Ac(a, b) += lnk.coefficient / node_area[a];
        sub.Ac(b, b) -= lnk.coefficient / node_area[b];
        sub.Ac(b, a) += lnk.coefficient / node_area[b];
      }
    }
    for (int u = 0; u < nu; ++u) {
      const InputSpec& in = params.inputs[u];
      const StateRef from = topo.level_state(in.from);
      const StateRef to = topo.level_state(in.to);
      if (from.subsystem == i) sub.Bc(from.local, u) -= 1.0 / node_area[from.local];
      if (to.subsystem == i) sub.Bc(to.local, u) += 1.0 / node_area[to.local];
    }
    sub.C = Matrix::Zero(ts.outputs.size(), n);
    for (std::size_t k = 0; k < ts.outputs.size(); ++k) {
      sub.C(k, ts.outputs[k]) = 1.0;
    }
    sub.y_ss = sub.C * sub.x_ss;
    const int ny = static_cast<int>(ts.outputs.size());
    sub.y_lower.resize(ny);
    sub.y_upper.resize(ny);
    for (int k = 0; k < ny; ++k) {
      const double bound = ts.is_reach ? params.reaches[ts.reach].level_bound
                                       : params.lakes[ts.lakes[k]].level_bound;
      sub.y_lower[k] = -bound;
      sub.y_upper[k] = bound;
    }
    // Until discretized, A and B hold the continuous matrices.
    sub.A = sub.Ac;
    sub.B = sub.Bc;
    model.subsystems.push_back(std::move(sub));
  }

  for (int u = 0; u < nu; ++u) {
    const InputSpec& in = params.inputs[u];
    ModelInput mi;
    mi.name = in.name;
    mi.owner = in.owner;
    mi.physical = u;
    mi.q_ss = model.q_ss_physical[u];
    mi.lower = (in.kind == InputKind::kReversible ? -in.pump_max : in.q_min) -
               mi.q_ss;
    mi.upper = in.q_max - mi.q_ss;
    model.inputs.push_back(mi);
  }
  return model;
}

void discretize_zoh(HpvModel& model, double ts) {
  for (auto& s : model.subsystems) {
    auto [ad, bd] = zoh_discretize(s.Ac, s.Bc, ts);
    s.A = std::move(ad);
    s.B = std::move(bd);
  }
  model.params.ts = ts;
}

void augment_virtual_flows(HpvModel& model) {
  if (model.augmented) return;
  std::vector<ModelInput> next;
  for (const ModelInput& in : model.inputs) {
    const InputSpec& spec = model.params.inputs[in.physical];
    if (spec.kind != InputKind::kReversible) {
      next.push_back(in);
      continue;
    }
    ModelInput t = in, p = in;
    t.name = in.name + "T";
    t.lower = 0.0;
    t.upper = spec.q_max;
    p.name = in.name + "P";
    p.sign = -1.0;
    p.lower = 0.0;
    p.upper = spec.pump_max;
    p.pump_part = true;
    next.push_back(t);
    next.push_back(p);
    VirtualFlowPair pair;
    pair.subsystem = in.owner;
    pair.turbine_var = static_cast<int>(next.size()) - 2;
    pair.pump_var = static_cast<int>(next.size()) - 1;
    model.virtual_pairs.push_back(pair);
  }
  model.inputs = std::move(next);
  // Old inputs were the physical flows themselves, so B_new = B_old * map.
  const Matrix map = model.input_to_physical();
  for (auto& s : model.subsystems) {
    s.Bc = s.Bc * map;
    s.B = s.B * map;
    if (s.reduced) s.Br = s.T * s.B;
  }
  model.augmented = true;
}

namespace {

// Level states of subsystem i that enter any power expression.
Matrix power_level_rows(const HpvModel& model, int i) {
  std::set<int> locals;
  for (const auto& in : model.params.inputs) {
    for (const Endpoint* e : {&in.from, &in.to}) {
      const StateRef s = model.topology.level_state(*e);
      if (s.subsystem == i) locals.insert(s.local);
    }
  }
  Matrix rows = Matrix::Zero(locals.size(), model.subsystems[i].states());
  int r = 0;
  for (int l : locals) rows(r++, l) = 1.0;
  return rows;
}

}  // namespace

void balanced_truncate(SubsystemModel& sub, const Matrix& extra_outputs,
                       int target_order) {
  Matrix c_ext(sub.C.rows() + extra_outputs.rows(), sub.C.cols());
  c_ext << sub.C, extra_outputs;
  const BalancedReduction red =
      balanced_truncation(sub.A, sub.B, c_ext, target_order);
  sub.T = red.T;
  sub.T_inv = red.T_inv;
  sub.Ar = sub.T * sub.A * sub.T_inv;
  sub.Br = sub.T * sub.B;
  sub.Cr = sub.C * sub.T_inv;
  sub.hankel_singular_values = red.hankel_singular_values;
  sub.unit_modes = red.unit_modes;
  sub.minimal_order = red.minimal_order;
  sub.reduced = true;
}

void reduce_model(HpvModel& model, const std::vector<int>& orders) {
  const int m = static_cast<int>(model.subsystems.size());
  std::vector<int> target = orders.empty() ? model.params.reduced_orders : orders;
  for (int i = 0; i < m; ++i) {
    SubsystemModel& s = model.subsystems[i];
    const Matrix extra = power_level_rows(model, i);
    int order = 0;
    if (target.empty()) {
      Matrix c_ext(s.C.rows() + extra.rows(), s.C.cols());
      c_ext << s.C, extra;
      order = minimal_order(s.A, s.B, c_ext);
    } else {
      if (static_cast<int>(target.size()) != m) {
        throw std::invalid_argument("one reduced order per subsystem required");
      }
      order = target[i];
    }
    balanced_truncate(s, extra, order);
  }
}

HpvModel build_default_model(const HpvParams& params) {
  HpvModel model = synthesize_linear_model(params);
  discretize_zoh(model, params.ts);
  augment_virtual_flows(model);
  reduce_model(model);
  return model;
}

Matrix PowerMap::reduced_state_coeffs(const HpvModel& model) const {
  Matrix out(state_coeffs.rows(), model.reduced_order_total());
  int off = 0, roff = 0;
  for (const auto& s : model.subsystems) {
    out.middleCols(roff, s.reduced_states()) =
        state_coeffs.middleCols(off, s.states()) * s.T_inv;
    off += s.states();
    roff += s.reduced_states();
  }
  return out;
}

Vector PowerMap::evaluate(const Vector& dx, const Vector& dq) const {
  return offsets + state_coeffs * dx + input_coeffs * dq;
}

PowerMap linearize_power(const HpvModel& model) {
  const HpvTopology& topo = model.topology;
  const int m = static_cast<int>(topo.subsystems.size());
  PowerMap pm;
  pm.state_coeffs = Matrix::Zero(m, topo.num_states());
  pm.input_coeffs = Matrix::Zero(m, model.num_inputs());
  pm.offsets = Vector::Zero(m);
  for (int u = 0; u < static_cast<int>(model.params.inputs.size()); ++u) {
    const InputSpec& in = model.params.inputs[u];
    const double q_ss = model.q_ss_physical[u];
    const double head = steady_level(model.params, in.from) -
                        steady_level(model.params, in.to);
    const int i = in.owner;
    pm.offsets[i] += in.k_turbine * q_ss * head;
    const StateRef up = topo.level_state(in.from);
    const StateRef down = topo.level_state(in.to);
    if (up.subsystem >= 0) {
      pm.state_coeffs(i, topo.state_offset(up.subsystem) + up.local) +=
          in.k_turbine * q_ss;
    }
    if (down.subsystem >= 0) {
      pm.state_coeffs(i, topo.state_offset(down.subsystem) + down.local) -=
          in.k_turbine * q_ss;
    }
    for (int j = 0; j < model.num_inputs(); ++j) {
      const ModelInput& mi = model.inputs[j];
      if (mi.physical != u) continue;
      const double k = mi.pump_part ? in.k_pump : in.k_turbine;
      pm.input_coeffs(i, j) = mi.sign * k * head;
    }
  }
  return pm;
}

Vector nonlinear_power(const HpvModel& model, const Vector& dx,
                       const Vector& dq) {
  const HpvTopology& topo = model.topology;
  const Vector q = model.q_ss_physical + model.input_to_physical() * dq;
  Vector p = Vector::Zero(topo.subsystems.size());
  auto level = [&](const Endpoint& e) {
    const StateRef s = topo.level_state(e);
    double base = steady_level(model.params, e);
    if (s.subsystem >= 0) base += dx[topo.state_offset(s.subsystem) + s.local];
    return base;
  };
  for (int u = 0; u < static_cast<int>(model.params.inputs.size()); ++u) {
    const InputSpec& in = model.params.inputs[u];
    const double k = (in.kind == InputKind::kReversible && q[u] < 0.0)
                         ? in.k_pump
                         : in.k_turbine;
    p[in.owner] += k * q[u] * (level(in.from) - level(in.to));
  }
  return p;
}

std::vector<std::vector<double>> step_response_errors(const HpvModel& model,
                                                      int steps) {
  std::vector<std::vector<double>> out;
  for (const auto& s : model.subsystems) {
    const int ny = static_cast<int>(s.C.rows());
    std::vector<double> num(ny, 0.0), den(ny, 0.0);
    for (int j = 0; j < model.num_inputs(); ++j) {
      if (s.B.col(j).cwiseAbs().maxCoeff() == 0.0) continue;
      Vector x = Vector::Zero(s.states());
      Vector xr = Vector::Zero(s.reduced_states());
      for (int k = 0; k < steps; ++k) {
        x = s.A * x + s.B.col(j);
        xr = s.Ar * xr + s.Br.col(j);
        const Vector y = s.C * x;
        const Vector yr = s.Cr * xr;
        for (int c = 0; c < ny; ++c) {
          num[c] += (y[c] - yr[c]) * (y[c] - yr[c]);
          den[c] += y[c] * y[c];
        }
      }
    }
    std::vector<double> err(ny, 0.0);
    for (int c = 0; c < ny; ++c) {
      err[c] = den[c] > 0.0 ? std::sqrt(num[c] / den[c]) : std::sqrt(num[c]);
    }
    out.push_back(err);
  }
  return out;
}

}  // namespace hpv
