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

#ifndef HPV_NETWORK_HPP
#define HPV_NETWORK_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hpv/problem_core.hpp"

namespace hpv {

/// Thrown when a message is addressed to a node outside the sender's
/// neighborhood.
class LocalityViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Message {
  int from = -1;
  int to = -1;
  std::vector<Vector> payload;

  std::int64_t scalars() const;
};

struct RoundStats {
  std::int64_t messages = 0;
  std::int64_t scalars = 0;
  std::int64_t bits = 0;
};

///
/// Synchronous neighbor-to-neighbor transport. Messages posted during a round
/// become visible only after deliver(), which acts as the barrier between
/// algorithm steps. Every post is checked against the neighborhood map.
///
class MessageNetwork {
 public:
  explicit MessageNetwork(Neighborhoods neighborhoods, int bits_per_scalar = 32);

  void post(Message msg);
  void deliver();

  const std::vector<Message>& inbox(int node) const { return inboxes_[node]; }
  const Neighborhoods& neighborhoods() const { return neighborhoods_; }

  /// Traffic since the last call, then resets the per-round counters.
  RoundStats take_round_stats();
  const RoundStats& cumulative() const { return cumulative_; }
  int bits_per_scalar() const { return bits_per_scalar_; }

 private:
  Neighborhoods neighborhoods_;
  int bits_per_scalar_;
  std::vector<Message> pending_;
  std::vector<std::vector<Message>> inboxes_;
  RoundStats round_;
  RoundStats cumulative_;
};

}  // namespace hpv

#endif  // HPV_NETWORK_HPP
