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

#include "efl/session_config.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "efl/error.hpp"

namespace efl {

std::string_view CloneModeName(CloneMode mode) {
  switch (mode) {
    case CloneMode::kOff: return "off";
    case CloneMode::kRandom: return "random";
    case CloneMode::kLeaveOneOut: return "leave-one-out";
  }
  return "off";
}

CloneMode ParseCloneMode(std::string_view name) {
  if (name == "off") return CloneMode::kOff;
  if (name == "random") return CloneMode::kRandom;
  if (name == "leave-one-out") return CloneMode::kLeaveOneOut;
  throw Error(ErrorCode::kDecode, "unknown clone mode '" + std::string(name) + "'");
}

Json SessionConfig::ToJson() const {
  return {
      {"min_clients", min_clients},
      {"max_rounds", max_rounds},
      {"target_accuracy", target_accuracy},
      {"convergence_epsilon", convergence_epsilon},
      {"patience", patience},
      {"learning_rate", learning_rate},
      {"local_epochs", local_epochs},
      {"batch_size", batch_size},
      {"clone_mode", std::string(CloneModeName(clone_mode))},
      {"clone_count", clone_count},
      {"clone_subset_size", clone_subset_size},
      {"outlier_threshold", outlier_threshold},
      {"rng_seed", rng_seed},
      {"round_deadline_ms", round_deadline_ms},
  };
}

namespace {

template <typename T>
void ReadUnsigned(const Json& json, const char* key, T& out) {
  if (!json.contains(key)) return;
  std::uint64_t v = RequireUnsigned(json, key);
  if (v > std::numeric_limits<T>::max()) {
    throw Error(ErrorCode::kDecode, std::string("field '") + key + "' out of range");
  }
  out = static_cast<T>(v);
}

void ReadNumber(const Json& json, const char* key, double& out) {
  if (json.contains(key)) out = RequireNumber(json, key);
}

}  // namespace

SessionConfig SessionConfig::FromJson(const Json& json) {
  if (!json.is_object()) {
    throw Error(ErrorCode::kDecode, "session config must be an object");
  }
  SessionConfig c;
  ReadUnsigned(json, "min_clients", c.min_clients);
  ReadUnsigned(json, "max_rounds", c.max_rounds);
  ReadNumber(json, "target_accuracy", c.target_accuracy);
  ReadNumber(json, "convergence_epsilon", c.convergence_epsilon);
  ReadUnsigned(json, "patience", c.patience);
  ReadNumber(json, "learning_rate", c.learning_rate);
  ReadUnsigned(json, "local_epochs", c.local_epochs);
  ReadUnsigned(json, "batch_size", c.batch_size);
  if (json.contains("clone_mode")) {
    c.clone_mode = ParseCloneMode(RequireString(json, "clone_mode"));
  }
  ReadUnsigned(json, "clone_count", c.clone_count);
  ReadUnsigned(json, "clone_subset_size", c.clone_subset_size);
  ReadNumber(json, "outlier_threshold", c.outlier_threshold);
  ReadUnsigned(json, "rng_seed", c.rng_seed);
  ReadUnsigned(json, "round_deadline_ms", c.round_deadline_ms);
  return c;
}

void SessionConfig::Validate(std::size_t roster_size) const {
  auto fail = [](const std::string& why) {
    throw Error(ErrorCode::kPolicyInvalid, "session: " + why);
  };
  if (min_clients < 1) fail("min_clients must be at least 1");
  if (min_clients > roster_size) fail("min_clients exceeds roster size");
  if (max_rounds < 1) fail("max_rounds must be at least 1");
  if (!(target_accuracy > 0.0 && target_accuracy <= 1.0)) {
    fail("target_accuracy must lie in (0, 1]");
  }
  if (!(convergence_epsilon > 0.0) || !std::isfinite(convergence_epsilon)) {
    fail("convergence_epsilon must be positive");
  }
  if (patience < 1) fail("patience must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail("learning_rate must be positive");
  }
  if (local_epochs < 1) fail("local_epochs must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (clone_mode == CloneMode::kRandom) {
    if (clone_count < 1) fail("clone_count must be at least 1");
    if (clone_subset_size < 1) fail("clone_subset_size must be at least 1");
    if (clone_subset_size > roster_size) {
      fail("clone_subset_size exceeds roster size");
    }
  }
  if (!(outlier_threshold > 0.0) || !std::isfinite(outlier_threshold)) {
    fail("outlier_threshold must be positive");
  }
  if (round_deadline_ms < 1) fail("round_deadline_ms must be positive");
}

}  // namespace efl
