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

#ifndef EFL_POLICY_MANAGER_HPP_
#define EFL_POLICY_MANAGER_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "efl/attestation.hpp"
#include "efl/audit.hpp"
#include "efl/policy.hpp"
#include "efl/sim_tee.hpp"

namespace efl::pm {

class AccessDenied : public Error {
 public:
  explicit AccessDenied(attest::Verdict verdict)
      : Error(ErrorCode::kAccessDenied, std::string(attest::CheckName(verdict.failed)) +
                                            ": " + verdict.detail),
        verdict_(std::move(verdict)) {}
  const attest::Verdict& verdict() const { return verdict_; }

 private:
  attest::Verdict verdict_;
};

// Policy store and secret release logic. Runs inside the manager's enclave:
// everything it persists under state_dir is sealed to that enclave, except
// the audit log, which carries names and hashes only.
//
//   policies/<hash>.pol            sealed canonical policy
//   secrets/<hash>/<name>.sealed   sealed secret value
//   audit.log
class PolicyManager {
 public:
  PolicyManager(tee::Enclave enclave, std::filesystem::path state_dir,
                audit::Clock clock = audit::WallClockMillis);

  const tee::Enclave& enclave() const { return enclave_; }
  const std::filesystem::path& state_dir() const { return state_dir_; }
  audit::AuditLog& audit_log() { return audit_; }

  // Idempotent for identical canonical content; Error(kPolicyConflict) when
  // the name is taken by different content.
  crypto::Digest UploadPolicy(std::string_view document);

  // Error(kNotFound) or Error(kAlreadyGenerated).
  void GenerateSecrets(const crypto::Digest& policy_hash);

  // Verifies `quote` against the policy's measurement for `role`, the nonce
  // this side issued on the request channel and that channel's binding.
  // AccessDenied on rejection; nothing about the secrets leaves the call.
  policy::InjectionBundle RequestSecrets(
      const crypto::Digest& policy_hash, std::string_view role,
      const std::optional<std::string>& client_id, ByteView quote,
      const tee::QuoteNonce& expected_nonce,
      const attest::ChannelBinding& binding);
  policy::InjectionBundle RequestSecrets(
      const attest::PeerEvidence& peer, const crypto::Digest& policy_hash,
      std::string_view role, const std::optional<std::string>& client_id,
      ByteView quote) {
    return RequestSecrets(policy_hash, role, client_id, quote,
                          peer.issued_nonce, peer.Binding());
  }

  std::optional<policy::Policy> FindPolicy(const crypto::Digest& hash) const;
  bool SecretsGenerated(const crypto::Digest& hash) const;

 private:
  std::filesystem::path PolicyPath(const crypto::Digest& hash) const;
  std::filesystem::path SecretDir(const crypto::Digest& hash) const;
  void Load();

  tee::Enclave enclave_;
  std::filesystem::path state_dir_;
  audit::AuditLog audit_;

  mutable std::shared_mutex mu_;
  std::map<crypto::Digest, policy::Policy> policies_;
  std::map<std::string, crypto::Digest> by_name_;
  std::map<crypto::Digest, std::map<std::string, std::string>> secrets_;
};

}  // namespace efl::pm

#endif  // EFL_POLICY_MANAGER_HPP_
