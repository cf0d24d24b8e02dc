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

#ifndef EFL_DEMO_HPP_
#define EFL_DEMO_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "efl/audit.hpp"
#include "efl/orchestrator.hpp"
#include "efl/session_config.hpp"
#include "efl/sim_tee.hpp"
#include "efl/transport.hpp"

namespace efl::demo {

// Code bundle each built-in role runs; measured into its enclave identity.
Bytes CodeBundle(std::string_view role);
Bytes ConfigBundle(std::string_view role);
tee::Measurement RoleMeasurement(std::string_view role);

// Platform keys derived from a seed, for reproducible runs only.
tee::PlatformKeys DerivedPlatformKeys(std::uint64_t seed, std::string_view name);

struct Options {
  std::filesystem::path work_dir;
  std::size_t clients = 3;
  std::size_t rows_per_client = 200;
  std::size_t features = 8;
  std::size_t validation_rows = 200;
  std::size_t test_rows = 1000;
  double separation = 0.35;
  std::uint64_t data_seed = 1;
  SessionConfig session;
  // Derive platform keys and data-owner keys from data_seed.
  bool deterministic_keys = false;
  bool use_tcp = false;
  // When set, every link is recorded.
  std::shared_ptr<net::WireCapture> capture;
  // client index -> rewrite applied to that client's updates.
  std::map<std::size_t, std::function<fl::ModelUpdate(fl::ModelUpdate)>> tamper;
  // Coordinator halts after this round (see CoordinatorOptions).
  std::optional<std::uint64_t> halt_after_round;
  // Reuse state under work_dir instead of starting fresh.
  bool resume = false;
};

// Plaintext material that must stay inside enclaves, kept in this process's
// memory so tests can scan artifacts for it.
struct Sensitive {
  std::vector<std::string> dataset_csv;
  std::vector<Bytes> update_vectors;
  std::vector<std::string> secret_values;
};

struct Report {
  std::string policy_hash;
  orch::SessionResult session;
  std::vector<orch::ClientResult> clients;
  std::vector<std::string> client_ids;
  double test_accuracy = 0.0;
  // Plain SGD on the pooled client rows with the same total epochs.
  double centralized_test_accuracy = 0.0;
  audit::AuditVerdict coordinator_audit;
  audit::AuditVerdict manager_audit;
  Sensitive sensitive;
};

// Runs manager, coordinator and clients in this process, each in its own
// simulated enclave on its own simulated platform.
Report Run(const Options& options);

}  // namespace efl::demo

#endif  // EFL_DEMO_HPP_
