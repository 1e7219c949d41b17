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
/// \file scenario.hpp
///
/// Scenario files for the closed loop. Every key is optional; missing keys
/// keep the SimConfig defaults. Unknown keys and mistyped values are rejected
/// with std::invalid_argument so typos never pass silently.
///
///   {
///     "horizon": 10, "scheme": "loc-ref-dyn", "steps": 48, "seed": 7,
///     "weights": {"q": 0.01, "r": 1.0, "gamma": 1.0, "rho_delta": 0.003, ...},
///     "noise": {"enabled": true, "process": 0.01, "measurement": 0.03},
///     "reference": [98.7, ...]  or  "reference_csv": "ref.csv",
///     "reference_amplitude": 0.3,
///     "solver": {"eps_eq": 1e-3, "eps_ineq": 1e-3, "eps_f": 1e-6,
///                "window": 10, "max_iterations": 5000, "fixed_iterations": 0},
///     "params": "hpv_params.json"  or an inline parameter object
///   }
///
#ifndef HPV_SCENARIO_HPP
#define HPV_SCENARIO_HPP

#include <optional>
#include <string>
#include <vector>

#include "hpv/json_io.hpp"
#include "hpv/sim_harness.hpp"

namespace hpv {

struct Scenario {
  SimConfig config;
  std::optional<HpvParams> params;  // default valley when empty
};

/// Relative paths inside the document resolve against base_dir.
Scenario scenario_from_json(const Json& j, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);
Json scenario_to_json(const Scenario& s);

/// Two columns (time, MW), optional header line. Returns the MW column.
std::vector<double> reference_from_csv(const std::string& text);

}  // namespace hpv

#endif  // HPV_SCENARIO_HPP
