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

#ifndef EFL_POLICY_HPP_
#define EFL_POLICY_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "efl/attestation.hpp"
#include "efl/canonical.hpp"
#include "efl/crypto.hpp"
#include "efl/session_config.hpp"
#include "efl/sim_tee.hpp"

namespace efl::policy {

// Keys of Policy::measurements.
inline constexpr std::string_view kMeasurementCoordinator = "coordinator";
inline constexpr std::string_view kMeasurementClient = "client";
inline constexpr std::string_view kMeasurementManager = "policy_manager_self";

enum class SecretKind { kSymmetricKey256, kRandomHex, kProvidedValue };

struct SecretSpec {
  std::string name;
  SecretKind kind = SecretKind::kSymmetricKey256;
  // random-hex-N: N random bytes, rendered as 2N hex digits.
  std::size_t random_bytes = 0;
  // Present iff kind is provided-value (absent in redacted views).
  std::optional<std::string> value;

  std::string KindName() const;
};

enum class Mechanism { kArgument, kEnvironmentVariable, kFileTemplate };
std::string_view MechanismName(Mechanism m);

struct InjectionRule {
  std::string role;
  // Restricts a client-role rule to one roster member.
  std::optional<std::string> client_id;
  Mechanism mechanism = Mechanism::kArgument;
  // Environment variable name, or relative file path for file templates.
  std::string target;
  // Text containing $$SECRET$$ tokens.
  std::string text;
};

struct RosterEntry {
  std::string client_id;
  crypto::Digest dataset_hash{};
};

struct Policy {
  std::string name;
  std::map<std::string, tee::Measurement> measurements;
  std::vector<crypto::PublicKey> platform_roots;
  std::uint16_t min_svn = 0;
  std::vector<RosterEntry> roster;
  std::optional<crypto::Digest> validation_dataset_hash;
  SessionConfig session;
  std::vector<SecretSpec> secrets;
  std::vector<InjectionRule> injection;

  // Error(kPolicyInvalid) naming the first problem. A redacted policy may
  // omit provided values.
  static Policy FromJson(const Json& json, bool redacted = false);
  static Policy Parse(std::string_view document);
  void Validate(bool redacted = false) const;

  // Roster, secrets and roots sorted; injection order is significant.
  Json ToJson() const;
  std::string Canonical() const { return CanonicalEncode(ToJson()); }
  crypto::Digest Hash() const;
  // ToJson() without provided secret values.
  Json PublicView() const;

  const RosterEntry* FindClient(std::string_view client_id) const;
  const SecretSpec* FindSecret(std::string_view name) const;
  // Pins the measurement for `role` (a key of measurements) and the roots.
  attest::AttestationPolicy AttestationFor(std::string_view role) const;
};

// Replaces every $$NAME$$ token; Error(kTemplate) naming the first token
// with no value. "$$" not followed by NAME$$ is literal text.
std::string RenderTemplate(std::string_view text,
                           const std::map<std::string, std::string>& secrets);
std::vector<std::string> TemplateTokens(std::string_view text);

struct InjectionBundle {
  std::string policy_hash;
  std::string role;
  std::optional<std::string> client_id;
  std::vector<std::string> arguments;
  std::map<std::string, std::string> environment;
  std::map<std::string, std::string> files;
  // Environment variables whose value is exactly one secret, with its name;
  // lets a consumer map a file's key id back to the injected key.
  std::map<std::string, std::string> environment_secrets;
  Json policy;

  Json ToJson() const;
  static InjectionBundle FromJson(const Json& json);
};

// Renders the rules that apply to (role, client_id) from resolved secret
// values.
InjectionBundle BuildBundle(const Policy& policy,
                            const crypto::Digest& policy_hash,
                            std::string_view role,
                            const std::optional<std::string>& client_id,
                            const std::map<std::string, std::string>& secrets);

}  // namespace efl::policy

#endif  // EFL_POLICY_HPP_
