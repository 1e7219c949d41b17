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

#include "hpv/network.hpp"

#include <string>
#include <utility>

namespace hpv {

std::int64_t Message::scalars() const {
  std::int64_t n = 0;
  for (const auto& v : payload) n += v.size();
  return n;
}

MessageNetwork::MessageNetwork(Neighborhoods neighborhoods, int bits_per_scalar)
    : neighborhoods_(std::move(neighborhoods)),
      bits_per_scalar_(bits_per_scalar),
      inboxes_(neighborhoods_.size()) {}

void MessageNetwork::post(Message msg) {
  const int n = static_cast<int>(neighborhoods_.size());
  if (msg.from < 0 || msg.from >= n || msg.to < 0 || msg.to >= n) {
    throw LocalityViolation("message endpoint out of range");
  }
  if (msg.from == msg.to || !neighborhoods_[msg.from].contains(msg.to)) {
    throw LocalityViolation("node " + std::to_string(msg.from + 1) +
                            " may not send to node " +
                            std::to_string(msg.to + 1));
  }
  const std::int64_t s = msg.scalars();
  round_.messages += 1;
  round_.scalars += s;
  round_.bits += s * bits_per_scalar_;
  cumulative_.messages += 1;
  cumulative_.scalars += s;
  cumulative_.bits += s * bits_per_scalar_;
  pending_.push_back(std::move(msg));
}

void MessageNetwork::deliver() {
  for (auto& box : inboxes_) box.clear();
  for (auto& msg : pending_) {
    const int to = msg.to;
    inboxes_[to].push_back(std::move(msg));
  }
  pending_.clear();
}

RoundStats MessageNetwork::take_round_stats() {
  RoundStats out = round_;
  round_ = {};
  return out;
}

}  // namespace hpv
