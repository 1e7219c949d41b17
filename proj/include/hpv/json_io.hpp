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

#ifndef HPV_JSON_IO_HPP
#define HPV_JSON_IO_HPP

#include <string>

#include "json.hpp"

#include "hpv/problem_core.hpp"

namespace hpv {

using Json = nlohmann::json;

// Matrices are row-major nested arrays; vectors are flat arrays.
Json to_json(const Matrix& m);
Json to_json(const Vector& v);
Matrix matrix_from_json(const Json& j);
Vector vector_from_json(const Json& j);

Json qp_to_json(const PartitionedQP& qp);
PartitionedQP qp_from_json(const Json& j);

Json dual_to_json(const DualPoint& dp);
DualPoint dual_from_json(const Json& j);

Json kkt_to_json(const KktReport& r);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace hpv

#endif  // HPV_JSON_IO_HPP
