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

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hpv/json_io.hpp"

namespace hpv {
namespace {

Json blocks_to_json(const BlockMap& blocks) {
  Json arr = Json::array();
  for (const auto& [key, blk] : blocks) {
    arr.push_back({{"i", key.first}, {"j", key.second}, {"data", to_json(blk)}});
  }
  return arr;
}

BlockMap blocks_from_json(const Json& arr, const std::vector<int>& partition,
                          const std::vector<Vector>& rhs) {
  BlockMap out;
  for (const auto& e : arr) {
    const int i = e.at("i").get<int>();
    const int j = e.at("j").get<int>();
    if (i < 0 || j < 0 || i >= static_cast<int>(partition.size()) ||
        j >= static_cast<int>(partition.size())) {
      throw std::invalid_argument("block index out of range");
    }
    Matrix m = matrix_from_json(e.at("data"));
    // Blocks in row groups with no rows serialize as [] and lose their width.
    if (m.size() == 0) m.resize(rhs[i].size(), partition[j]);
    out[{i, j}] = std::move(m);
  }
  return out;
}

Json vectors_to_json(const std::vector<Vector>& vs) {
  Json arr = Json::array();
  for (const auto& v : vs) arr.push_back(to_json(v));
  return arr;
}

std::vector<Vector> vectors_from_json(const Json& arr) {
  std::vector<Vector> out;
  for (const auto& e : arr) out.push_back(vector_from_json(e));
  return out;
}

}  // namespace

Json to_json(const Matrix& m) {
  Json arr = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    arr.push_back(std::move(row));
  }
  return arr;
}

Json to_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index r = 0; r < v.size(); ++r) arr.push_back(v[r]);
  return arr;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("matrix must be an array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw std::invalid_argument("ragged matrix rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("vector must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index r = 0; r < v.size(); ++r) v[r] = j[r].get<double>();
  return v;
}

Json qp_to_json(const PartitionedQP& qp) {
  Json j;
  j["partition"] = qp.partition;
  j["gamma"] = qp.gamma;
  Json h = Json::array();
  for (const auto& b : qp.quad_blocks) h.push_back(to_json(b));
  j["quad_blocks"] = std::move(h);
  j["lin_cost"] = vectors_to_json(qp.lin_cost);
  j["eq_blocks"] = blocks_to_json(qp.eq_blocks);
  j["eq_rhs"] = vectors_to_json(qp.eq_rhs);
  j["ineq_blocks"] = blocks_to_json(qp.ineq_blocks);
  j["ineq_rhs"] = vectors_to_json(qp.ineq_rhs);
  j["onenorm_blocks"] = blocks_to_json(qp.onenorm_blocks);
  j["onenorm_offset"] = vectors_to_json(qp.onenorm_offset);
  return j;
}

PartitionedQP qp_from_json(const Json& j) {
  PartitionedQP qp;
  qp.partition = j.at("partition").get<std::vector<int>>();
  qp.gamma = j.at("gamma").get<double>();
  for (const auto& b : j.at("quad_blocks")) {
    qp.quad_blocks.push_back(matrix_from_json(b));
  }
  const auto m = qp.partition.size();
  auto optional_vectors = [&](const char* key, bool sized_by_partition) {
    std::vector<Vector> out;
    if (j.contains(key)) {
      out = vectors_from_json(j.at(key));
    } else {
      for (std::size_t i = 0; i < m; ++i) {
        out.push_back(Vector::Zero(sized_by_partition ? qp.partition[i] : 0));
      }
    }
    return out;
  };
  qp.lin_cost = optional_vectors("lin_cost", true);
  qp.eq_rhs = optional_vectors("eq_rhs", false);
  qp.ineq_rhs = optional_vectors("ineq_rhs", false);
  qp.onenorm_offset = optional_vectors("onenorm_offset", false);
  if (qp.eq_rhs.size() != m || qp.ineq_rhs.size() != m ||
      qp.onenorm_offset.size() != m || qp.lin_cost.size() != m) {
    throw std::invalid_argument("per-subsystem arrays do not match partition");
  }
  if (j.contains("eq_blocks")) {
    qp.eq_blocks = blocks_from_json(j.at("eq_blocks"), qp.partition, qp.eq_rhs);
  }
  if (j.contains("ineq_blocks")) {
    qp.ineq_blocks =
        blocks_from_json(j.at("ineq_blocks"), qp.partition, qp.ineq_rhs);
  }
  if (j.contains("onenorm_blocks")) {
    qp.onenorm_blocks =
        blocks_from_json(j.at("onenorm_blocks"), qp.partition, qp.onenorm_offset);
  }
  return qp;
}

Json dual_to_json(const DualPoint& dp) {
  return {{"lambda", vectors_to_json(dp.lambda)},
          {"mu", vectors_to_json(dp.mu)},
          {"nu", vectors_to_json(dp.nu)}};
}

DualPoint dual_from_json(const Json& j) {
  DualPoint dp;
  dp.lambda = vectors_from_json(j.at("lambda"));
  dp.mu = vectors_from_json(j.at("mu"));
  dp.nu = vectors_from_json(j.at("nu"));
  return dp;
}

Json kkt_to_json(const KktReport& r) {
  return {{"stationarity_residual", r.stationarity_residual},
          {"eq_violation", r.eq_violation},
          {"ineq_violation", r.ineq_violation},
          {"complementary_slackness_gap", r.complementary_slackness_gap},
          {"onenorm_subgradient_gap", r.onenorm_subgradient_gap}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Json::parse(in);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace hpv
