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

#include "hpv/model_io.hpp"

#include <stdexcept>

namespace hpv {
namespace {

// Endpoints: {"lake": i}, {"reach": r, "node": n} or {"sink": level}.
Json endpoint_to_json(const Endpoint& e) {
  switch (e.kind) {
    case Endpoint::Kind::kLake:
      return {{"lake", e.index}};
    case Endpoint::Kind::kReachNode:
      return {{"reach", e.index}, {"node", e.node}};
    case Endpoint::Kind::kSink:
      return {{"sink", e.sink_level}};
  }
  return {};
}

Endpoint endpoint_from_json(const Json& j) {
  Endpoint e;
  if (j.contains("lake")) {
    e.kind = Endpoint::Kind::kLake;
    e.index = j.at("lake").get<int>();
  } else if (j.contains("reach")) {
    e.kind = Endpoint::Kind::kReachNode;
    e.index = j.at("reach").get<int>();
    e.node = j.at("node").get<int>();
  } else if (j.contains("sink")) {
    e.kind = Endpoint::Kind::kSink;
    e.sink_level = j.at("sink").get<double>();
  } else {
    throw std::invalid_argument("endpoint needs one of lake, reach, sink");
  }
  return e;
}

const char* kind_name(InputKind k) {
  switch (k) {
    case InputKind::kDam:
      return "dam";
    case InputKind::kTurbine:
      return "turbine";
    case InputKind::kReversible:
      return "reversible";
  }
  return "dam";
}

InputKind kind_from(const std::string& s) {
  if (s == "dam") return InputKind::kDam;
  if (s == "turbine") return InputKind::kTurbine;
  if (s == "reversible") return InputKind::kReversible;
  throw std::invalid_argument("unknown input kind '" + s + "'");
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Json params_to_json(const HpvParams& p) {
  Json j;
  j["ts"] = p.ts;
  j["gravity"] = p.gravity;
  j["cells"] = p.cells;
  j["subsystems"] = p.subsystem_names;
  j["lakes"] = Json::array();
  for (const auto& l : p.lakes) {
    j["lakes"].push_back({{"name", l.name},
                          {"subsystem", l.subsystem},
                          {"area", l.area},
                          {"bed", l.bed},
                          {"depth", l.depth},
                          {"level_bound", l.level_bound}});
  }
  j["reaches"] = Json::array();
  for (const auto& r : p.reaches) {
    j["reaches"].push_back({{"name", r.name},
                            {"subsystem", r.subsystem},
                            {"length", r.length},
                            {"width", r.width},
                            {"depth", r.depth},
                            {"bed_up", r.bed_up},
                            {"bed_down", r.bed_down},
                            {"friction", r.friction},
                            {"level_bound", r.level_bound}});
  }
  j["links"] = Json::array();
  for (const auto& l : p.links) {
    j["links"].push_back({{"lake_a", l.lake_a},
                          {"lake_b", l.lake_b},
                          {"coefficient", l.coefficient}});
  }
  j["inputs"] = Json::array();
  for (const auto& in : p.inputs) {
    j["inputs"].push_back({{"name", in.name},
                           {"kind", kind_name(in.kind)},
                           {"owner", in.owner},
                           {"from", endpoint_to_json(in.from)},
                           {"to", endpoint_to_json(in.to)},
                           {"k_turbine", in.k_turbine},
                           {"k_pump", in.k_pump},
                           {"q_min", in.q_min},
                           {"q_max", in.q_max},
                           {"pump_max", in.pump_max}});
  }
  j["inflows"] = Json::array();
  for (const auto& f : p.inflows) {
    j["inflows"].push_back({{"reach", f.reach}, {"node", f.node}, {"flow", f.flow}});
  }
  j["reduced_orders"] = p.reduced_orders;
  return j;
}

HpvParams params_from_json(const Json& j) {
  try {
    HpvParams p;
    read_opt(j, "ts", p.ts);
    read_opt(j, "gravity", p.gravity);
    read_opt(j, "cells", p.cells);
    p.subsystem_names = j.at("subsystems").get<std::vector<std::string>>();
    for (const auto& l : j.value("lakes", Json::array())) {
      LakeSpec s;
      s.name = l.at("name").get<std::string>();
      s.subsystem = l.at("subsystem").get<int>();
      read_opt(l, "area", s.area);
      read_opt(l, "bed", s.bed);
      read_opt(l, "depth", s.depth);
      read_opt(l, "level_bound", s.level_bound);
      p.lakes.push_back(s);
    }
    for (const auto& r : j.value("reaches", Json::array())) {
      ReachSpec s;
      s.name = r.at("name").get<std::string>();
      s.subsystem = r.at("subsystem").get<int>();
      read_opt(r, "length", s.length);
      read_opt(r, "width", s.width);
      read_opt(r, "depth", s.depth);
      read_opt(r, "bed_up", s.bed_up);
      read_opt(r, "bed_down", s.bed_down);
      read_opt(r, "friction", s.friction);
      read_opt(r, "level_bound", s.level_bound);
      p.reaches.push_back(s);
    }
    for (const auto& l : j.value("links", Json::array())) {
      PassiveLink s;
      s.lake_a = l.at("lake_a").get<int>();
      s.lake_b = l.at("lake_b").get<int>();
      read_opt(l, "coefficient", s.coefficient);
      p.links.push_back(s);
    }
    for (const auto& in : j.at("inputs")) {
      InputSpec s;
      s.name = in.at("name").get<std::string>();
      s.kind = kind_from(in.at("kind").get<std::string>());
      s.owner = in.at("owner").get<int>();
      s.from = endpoint_from_json(in.at("from"));
      s.to = endpoint_from_json(in.at("to"));
      read_opt(in, "k_turbine", s.k_turbine);
      read_opt(in, "k_pump", s.k_pump);
      read_opt(in, "q_min", s.q_min);
      read_opt(in, "q_max", s.q_max);
      read_opt(in, "pump_max", s.pump_max);
      p.inputs.push_back(s);
    }
    for (const auto& f : j.value("inflows", Json::array())) {
      p.inflows.push_back({f.at("reach").get<int>(), f.at("node").get<int>(),
                           f.at("flow").get<double>()});
    }
    read_opt(j, "reduced_orders", p.reduced_orders);
    build_topology(p);  // validates
    return p;
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("hpv parameters: ") + e.what());
  }
}

Json model_to_json(const HpvModel& model) {
  Json j;
  j["ts"] = model.params.ts;
  j["num_states"] = model.topology.num_states();
  j["num_inputs"] = model.num_inputs();
  j["num_outputs"] = model.topology.num_outputs();
  j["reduced_order_total"] = model.reduced_order_total();
  j["inputs"] = Json::array();
  for (const auto& in : model.inputs) {
    j["inputs"].push_back({{"name", in.name},
                           {"owner", in.owner},
                           {"physical", in.physical},
                           {"sign", in.sign},
                           {"q_ss", in.q_ss},
                           {"lower", in.lower},
                           {"upper", in.upper}});
  }
  j["subsystems"] = Json::array();
  for (const auto& s : model.subsystems) {
    Json sj;
    sj["name"] = s.name;
    sj["states"] = s.states();
    sj["A"] = to_json(s.A);
    sj["B"] = to_json(s.B);
    sj["C"] = to_json(s.C);
    sj["x_ss"] = to_json(s.x_ss);
    sj["y_lower"] = to_json(s.y_lower);
    sj["y_upper"] = to_json(s.y_upper);
    if (s.reduced) {
      sj["reduced"] = {{"order", s.reduced_states()},
                       {"A", to_json(s.Ar)},
                       {"B", to_json(s.Br)},
                       {"C", to_json(s.Cr)},
                       {"T", to_json(s.T)},
                       {"T_inv", to_json(s.T_inv)},
                       {"hankel_singular_values", to_json(s.hankel_singular_values)},
                       {"unit_modes", s.unit_modes},
                       {"minimal_order", s.minimal_order}};
    }
    j["subsystems"].push_back(std::move(sj));
  }
  return j;
}

Json reduction_report(const HpvModel& model, int steps) {
  const auto errors = step_response_errors(model, steps);
  Json j;
  j["total_reduced_order"] = model.reduced_order_total();
  j["steps"] = steps;
  double worst = 0.0;
  j["subsystems"] = Json::array();
  for (std::size_t i = 0; i < model.subsystems.size(); ++i) {
    const auto& s = model.subsystems[i];
    for (double e : errors[i]) worst = std::max(worst, e);
    j["subsystems"].push_back(
        {{"name", s.name},
         {"full_order", s.states()},
         {"reduced_order", s.reduced_states()},
         {"minimal_order", s.minimal_order},
         {"unit_modes", s.unit_modes},
         {"hankel_singular_values", to_json(s.hankel_singular_values)},
         {"step_response_error", errors[i]}});
  }
  j["max_step_response_error"] = worst;
  return j;
}

}  // namespace hpv
