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

#ifndef EFL_ORCHESTRATOR_HPP_
#define EFL_ORCHESTRATOR_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "efl/attestation.hpp"
#include "efl/audit.hpp"
#include "efl/counter_service.hpp"
#include "efl/fl_core.hpp"
#include "efl/manager_service.hpp"
#include "efl/outlier_guard.hpp"
#include "efl/policy.hpp"

namespace efl::orch {

// Environment variables the coordinator and clients expect in their
// injection bundles. Each must hold exactly one $$SECRET$$ token so the
// key id of a shielded file can be matched to it.
inline constexpr std::string_view kEnvCheckpointKey = "EFL_CHECKPOINT_KEY";
inline constexpr std::string_view kEnvValidationKey = "EFL_VALIDATION_KEY";
inline constexpr std::string_view kEnvDatasetKey = "EFL_DATASET_KEY";

struct RoundRecord {
  std::uint64_t round = 0;
  std::vector<std::string> admitted;
  // client id -> hex hash of the submitted parameters.
  std::map<std::string, std::string> update_hashes;
  std::vector<std::string> dropped;
  std::vector<std::string> flagged;
  std::string params_hash;
  // Hash of the checkpoint plaintext written for this round.
  std::string checkpoint_hash;
  std::uint64_t checkpoint_counter = 0;
  fl::RoundMetrics metrics;
  Json guard;

  Json ToJson() const;
};

struct GlobalModel {
  std::uint64_t round = 0;
  fl::ParameterVector params;
  std::vector<fl::RoundMetrics> history;
};

struct Rejection {
  std::string reason;  // attestation | handshake | protocol | roster | dataset-hash | policy | duplicate
  std::string client_id;
  std::string detail;
};

struct SessionResult {
  GlobalModel model;
  fl::Convergence convergence = fl::Convergence::kContinue;
  // Set when the session stopped early through CoordinatorOptions::halt_after_round.
  bool halted = false;
  bool resumed = false;
  std::vector<RoundRecord> rounds;
  std::vector<std::string> admitted;
  std::vector<Rejection> rejected;
  std::filesystem::path audit_path;
};

struct CoordinatorOptions {
  std::filesystem::path state_dir;
  std::filesystem::path validation_file;
  crypto::Digest policy_hash{};
  // How long to wait for roster members to connect.
  net::Millis join_window{10'000};
  net::Millis handshake_timeout{5'000};
  std::uint32_t max_quorum_failures = 3;
  audit::Clock clock = audit::WallClockMillis;
  // Returns after committing this round without ending the session, the way
  // a killed process would leave things.
  std::optional<std::uint64_t> halt_after_round;
  // Sees the injection bundle once it arrives; for in-process tests.
  std::function<void(const policy::InjectionBundle&)> on_bundle;
};

class Coordinator {
 public:
  Coordinator(tee::Enclave enclave, CoordinatorOptions options);

  // Obtains the coordinator bundle, restores or starts the session, admits
  // clients from `listener` and drives rounds until convergence.
  // Error(kRollbackDetected) when the stored checkpoint is stale,
  // Error(kSessionFailed) on persistent quorum failure.
  SessionResult Run(pm::ManagerClient& manager, net::Listener& listener);

 private:
  struct Session;
  struct Peer;

  tee::Enclave enclave_;
  CoordinatorOptions options_;
};

struct ClientOptions {
  std::string client_id;
  std::filesystem::path dataset_file;
  crypto::Digest policy_hash{};
  net::Millis handshake_timeout{5'000};
  // Longest wait for the next coordinator message.
  net::Millis idle_timeout{120'000};
  // Test hooks. A preset bundle skips the manager request; tamper_update
  // rewrites each update before submission.
  std::optional<policy::InjectionBundle> preset_bundle;
  std::function<fl::ModelUpdate(fl::ModelUpdate)> tamper_update;
  std::function<void(const policy::InjectionBundle&)> on_bundle;
};

struct ClientResult {
  bool admitted = false;
  std::string rejection;
  std::uint64_t updates_sent = 0;
  std::vector<fl::RoundMetrics> commits;
  std::optional<fl::ParameterVector> final_params;
  std::string end_reason;
};

class ClientAgent {
 public:
  ClientAgent(attest::QuoteSource attester, ClientOptions options);

  ClientResult Run(pm::ManagerClient& manager,
                   std::unique_ptr<net::Transport> coordinator);

 private:
  attest::QuoteSource attester_;
  ClientOptions options_;
};

// Decrypts a shielded file with the key injected under `env_var`.
Bytes OpenShieldedWithBundle(const std::filesystem::path& file,
                             const policy::InjectionBundle& bundle,
                             std::string_view env_var,
                             counter::CounterClient& counters);

}  // namespace efl::orch

#endif  // EFL_ORCHESTRATOR_HPP_
