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

#ifndef HPV_MODEL_IO_HPP
#define HPV_MODEL_IO_HPP

#include "hpv/hpv_model.hpp"
#include "hpv/json_io.hpp"

namespace hpv {

Json params_to_json(const HpvParams& params);

/// Missing keys keep their defaults from HpvParams and the LakeSpec,
/// ReachSpec and InputSpec structs, except the topology lists, which are
/// required. Throws std::invalid_argument on malformed values.
HpvParams params_from_json(const Json& j);

/// Full and reduced matrices of every subsystem plus input metadata.
Json model_to_json(const HpvModel& model);

/// Orders, Hankel singular values and step-response errors.
Json reduction_report(const HpvModel& model, int steps = 48);

}  // namespace hpv

#endif  // HPV_MODEL_IO_HPP
