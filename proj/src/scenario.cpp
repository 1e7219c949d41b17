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

#include "hpv/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hpv/model_io.hpp"

namespace hpv {
namespace {

namespace fs = std::filesystem;

void check_keys(const Json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
    }
  }
}

double number(const Json& j, const std::string& key) {
  if (!j.is_number()) throw std::invalid_argument(key + " must be a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& key) {
  if (!j.is_number_integer()) {
    throw std::invalid_argument(key + " must be an integer");
  }
  return j.get<int>();
}

void positive(double v, const std::string& key) {
  if (!(v > 0.0)) throw std::invalid_argument(key + " must be > 0");
}

void nonnegative(double v, const std::string& key) {
  if (!(v >= 0.0)) throw std::invalid_argument(key + " must be >= 0");
}

std::string resolve(const std::string& path, const std::string& base) {
  fs::path p(path);
  return p.is_absolute() ? path : (fs::path(base) / p).string();
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void read_weights(const Json& j, MpcWeights& w) {
  check_keys(j, "weights",
             {"q", "r", "gamma", "rho_delta", "alpha", "flow_scale",
              "output_backoff", "power_scale"});
  if (j.contains("q")) w.q = number(j["q"], "weights.q");
  if (j.contains("r")) w.r = number(j["r"], "weights.r");
  if (j.contains("gamma")) w.gamma = number(j["gamma"], "weights.gamma");
  if (j.contains("rho_delta")) {
    w.rho_delta = number(j["rho_delta"], "weights.rho_delta");
  }
  if (j.contains("alpha")) w.alpha = number(j["alpha"], "weights.alpha");
  if (j.contains("flow_scale")) {
    w.flow_scale = number(j["flow_scale"], "weights.flow_scale");
  }
  if (j.contains("output_backoff")) {
    w.output_backoff = number(j["output_backoff"], "weights.output_backoff");
  }
  if (j.contains("power_scale")) {
    w.power_scale = number(j["power_scale"], "weights.power_scale");
  }
  positive(w.q, "weights.q");
  positive(w.r, "weights.r");
  positive(w.gamma, "weights.gamma");
  positive(w.rho_delta, "weights.rho_delta");
  positive(w.flow_scale, "weights.flow_scale");
  positive(w.power_scale, "weights.power_scale");
  nonnegative(w.output_backoff, "weights.output_backoff");
  if (!(w.alpha > 0.0 && w.alpha < 1.0)) {
    throw std::invalid_argument("weights.alpha must be in (0, 1)");
  }
}

void read_solver(const Json& j, StoppingRule& s) {
  check_keys(j, "solver",
             {"eps_eq", "eps_ineq", "eps_f", "window", "max_iterations",
              "fixed_iterations"});
  if (j.contains("eps_eq")) s.eps_eq = number(j["eps_eq"], "solver.eps_eq");
  if (j.contains("eps_ineq")) {
    s.eps_ineq = number(j["eps_ineq"], "solver.eps_ineq");
  }
  if (j.contains("eps_f")) s.eps_f = number(j["eps_f"], "solver.eps_f");
  if (j.contains("window")) s.window = integer(j["window"], "solver.window");
  if (j.contains("max_iterations")) {
    s.max_iterations = integer(j["max_iterations"], "solver.max_iterations");
  }
  if (j.contains("fixed_iterations")) {
    s.fixed_iterations =
        integer(j["fixed_iterations"], "solver.fixed_iterations");
  }
  positive(s.eps_eq, "solver.eps_eq");
  positive(s.eps_ineq, "solver.eps_ineq");
  positive(s.eps_f, "solver.eps_f");
  positive(s.window, "solver.window");
  positive(s.max_iterations, "solver.max_iterations");
  nonnegative(s.fixed_iterations, "solver.fixed_iterations");
  s.mode = s.fixed_iterations > 0 ? StoppingRule::Mode::kFixedIterations
                                  : StoppingRule::Mode::kComposite;
}

}  // namespace

Scenario scenario_from_json(const Json& j, const std::string& base_dir) {
  check_keys(j, "scenario",
             {"horizon", "scheme", "steps", "seed", "weights", "noise",
              "reference", "reference_csv", "reference_amplitude", "solver",
              "params", "workers"});
  Scenario s;
  SimConfig& c = s.config;
  if (j.contains("horizon")) c.mpc.horizon = integer(j["horizon"], "horizon");
  positive(c.mpc.horizon, "horizon");
  if (j.contains("scheme")) {
    if (!j["scheme"].is_string()) {
      throw std::invalid_argument("scheme must be a string");
    }
    c.mpc.scheme = scheme_from_string(j["scheme"].get<std::string>());
  }
  if (j.contains("steps")) c.steps = integer(j["steps"], "steps");
  positive(c.steps, "steps");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      throw std::invalid_argument("seed must be a nonnegative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("workers")) c.workers = integer(j["workers"], "workers");
  positive(c.workers, "workers");
  if (j.contains("weights")) read_weights(j["weights"], c.mpc.weights);
  if (j.contains("noise")) {
    const Json& n = j["noise"];
    check_keys(n, "noise", {"enabled", "process", "measurement"});
    if (n.contains("enabled")) {
      if (!n["enabled"].is_boolean()) {
        throw std::invalid_argument("noise.enabled must be a boolean");
      }
      c.noise = n["enabled"].get<bool>();
    }
    if (n.contains("process")) {
      c.process_noise = number(n["process"], "noise.process");
    }
    if (n.contains("measurement")) {
      c.measurement_noise = number(n["measurement"], "noise.measurement");
    }
    nonnegative(c.process_noise, "noise.process");
    nonnegative(c.measurement_noise, "noise.measurement");
  }
  if (j.contains("reference") && j.contains("reference_csv")) {
    throw std::invalid_argument("give either reference or reference_csv");
  }
  if (j.contains("reference")) {
    if (!j["reference"].is_array()) {
      throw std::invalid_argument("reference must be an array of MW values");
    }
    for (const Json& v : j["reference"]) {
      c.reference.push_back(number(v, "reference[]"));
    }
  }
  if (j.contains("reference_csv")) {
    if (!j["reference_csv"].is_string()) {
      throw std::invalid_argument("reference_csv must be a path");
    }
    c.reference = reference_from_csv(
        read_text(resolve(j["reference_csv"].get<std::string>(), base_dir)));
  }
  if (j.contains("reference_amplitude")) {
    c.reference_amplitude =
        number(j["reference_amplitude"], "reference_amplitude");
  }
  if (j.contains("solver")) read_solver(j["solver"], c.stop);
  if (j.contains("params")) {
    const Json& p = j["params"];
    if (p.is_string()) {
      s.params = params_from_json(
          read_json_file(resolve(p.get<std::string>(), base_dir)));
    } else {
      s.params = params_from_json(p);
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::invalid_argument(e.what());
  }
  return scenario_from_json(j, fs::path(path).parent_path().string());
}

Json scenario_to_json(const Scenario& s) {
  const SimConfig& c = s.config;
  const MpcWeights& w = c.mpc.weights;
  Json j;
  j["horizon"] = c.mpc.horizon;
  j["scheme"] = to_string(c.mpc.scheme);
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["weights"] = {{"q", w.q},
                  {"r", w.r},
                  {"gamma", w.gamma},
                  {"rho_delta", w.rho_delta},
                  {"alpha", w.alpha},
                  {"flow_scale", w.flow_scale},
                  {"output_backoff", w.output_backoff},
                  {"power_scale", w.power_scale}};
  j["noise"] = {{"enabled", c.noise},
                {"process", c.process_noise},
                {"measurement", c.measurement_noise}};
  if (!c.reference.empty()) j["reference"] = c.reference;
  j["reference_amplitude"] = c.reference_amplitude;
  j["solver"] = {{"eps_eq", c.stop.eps_eq},
                 {"eps_ineq", c.stop.eps_ineq},
                 {"eps_f", c.stop.eps_f},
                 {"window", c.stop.window},
                 {"max_iterations", c.stop.max_iterations},
                 {"fixed_iterations", c.stop.fixed_iterations}};
  if (s.params) j["params"] = params_to_json(*s.params);
  return j;
}

std::vector<double> reference_from_csv(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("reference csv line " +
                                  std::to_string(line_no) + ": need time,MW");
    }
    const std::string t = line.substr(0, comma);
    const std::string mw = line.substr(comma + 1);
    try {
      std::size_t used = 0;
      std::stod(t);
      const double v = std::stod(mw, &used);
      if (mw.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::invalid_argument("trailing text");
      }
      out.push_back(v);
    } catch (const std::exception&) {
      if (line_no == 1 && out.empty()) continue;  // header
      throw std::invalid_argument("reference csv line " +
                                  std::to_string(line_no) + ": not a number");
    }
  }
  if (out.empty()) throw std::invalid_argument("reference csv has no rows");
  return out;
}

}  // namespace hpv
