// Copyright 2026 The EnclaveFL Authors
//
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

#ifndef EFL_SESSION_CONFIG_HPP_
#define EFL_SESSION_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "efl/canonical.hpp"

namespace efl {

enum class CloneMode {
  kOff,
  kRandom,
  // k = number of updates, m = k - 1, clone i omits the i-th client in id
  // order.
  kLeaveOneOut,
};

std::string_view CloneModeName(CloneMode mode);
CloneMode ParseCloneMode(std::string_view name);

// Hyperparameters every participant agrees on through the policy.
struct SessionConfig {
  std::uint32_t min_clients = 1;
  std::uint32_t max_rounds = 30;
  double target_accuracy = 1.0;
  double convergence_epsilon = 1e-4;
  std::uint32_t patience = 3;
  double learning_rate = 0.1;
  std::uint32_t local_epochs = 2;
  std::uint32_t batch_size = 16;
  CloneMode clone_mode = CloneMode::kRandom;
  std::uint32_t clone_count = 8;
  std::uint32_t clone_subset_size = 1;
  double outlier_threshold = 0.02;
  std::uint64_t rng_seed = 0;
  std::uint64_t round_deadline_ms = 30'000;

  Json ToJson() const;
  // Missing fields keep their defaults; mistyped ones raise Error(kDecode).
  static SessionConfig FromJson(const Json& json);

  // Error(kPolicyInvalid) naming the first violated constraint.
  void Validate(std::size_t roster_size) const;
};

}  // namespace efl

#endif  // EFL_SESSION_CONFIG_HPP_
