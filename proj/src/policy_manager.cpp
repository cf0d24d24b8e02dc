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

#include "efl/policy_manager.hpp"

#include <mutex>

#include "efl/error.hpp"
#include "efl/file_io.hpp"

namespace efl::pm {
namespace fs = std::filesystem;

PolicyManager::PolicyManager(tee::Enclave enclave, fs::path state_dir,
                             audit::Clock clock)
    : enclave_(std::move(enclave)),
      state_dir_(std::move(state_dir)),
      audit_(state_dir_ / "audit.log", std::move(clock)) {
  fs::create_directories(state_dir_ / "policies");
  fs::create_directories(state_dir_ / "secrets");
  Load();
}

fs::path PolicyManager::PolicyPath(const crypto::Digest& hash) const {
  return state_dir_ / "policies" / (HexEncode(hash) + ".pol");
}

fs::path PolicyManager::SecretDir(const crypto::Digest& hash) const {
  return state_dir_ / "secrets" / HexEncode(hash);
}

void PolicyManager::Load() {
  for (const auto& entry : fs::directory_iterator(state_dir_ / "policies")) {
    if (entry.path().extension() != ".pol") continue;
    Bytes plain = enclave_.Unseal(tee::SealedBlob::Parse(ReadFileBytes(entry.path())));
    policy::Policy p = policy::Policy::Parse(ToString(plain));
    crypto::Digest hash = p.Hash();
    if (HexEncode(hash) != entry.path().stem().string()) {
      throw Error(ErrorCode::kIntegrity,
                  "stored policy does not match its name: " + entry.path().string());
    }
    by_name_[p.name] = hash;
    policies_.emplace(hash, std::move(p));
  }
  for (const auto& entry : fs::directory_iterator(state_dir_ / "secrets")) {
    if (entry.path().extension() == ".partial") {
      // Generation interrupted before it committed.
      fs::remove_all(entry.path());
      continue;
    }
    crypto::Digest hash =
        HexDecodeFixed<crypto::kDigestSize>(entry.path().filename().string());
    auto& values = secrets_[hash];
    for (const auto& f : fs::directory_iterator(entry.path())) {
      Bytes plain = enclave_.Unseal(tee::SealedBlob::Parse(ReadFileBytes(f.path())));
      values[f.path().stem().string()] = ToString(plain);
    }
  }
}

crypto::Digest PolicyManager::UploadPolicy(std::string_view document) {
  policy::Policy p = policy::Policy::Parse(document);
  crypto::Digest hash = p.Hash();
  std::unique_lock lock(mu_);
  if (auto it = by_name_.find(p.name); it != by_name_.end()) {
    if (it->second == hash) return hash;
    throw Error(ErrorCode::kPolicyConflict,
                "policy name '" + p.name + "' is already bound to " +
                    HexEncode(it->second));
  }
  std::string canonical = p.Canonical();
  WriteFileAtomic(PolicyPath(hash), enclave_.Seal(AsBytes(canonical)).Serialize());
  audit_.Append("policy-uploaded",
                {{"policy_hash", HexEncode(hash)}, {"name", p.name}});
  by_name_[p.name] = hash;
  policies_.emplace(hash, std::move(p));
  return hash;
}

void PolicyManager::GenerateSecrets(const crypto::Digest& hash) {
  std::unique_lock lock(mu_);
  auto it = policies_.find(hash);
  if (it == policies_.end()) {
    throw Error(ErrorCode::kNotFound, "no policy " + HexEncode(hash));
  }
  if (secrets_.contains(hash)) {
    throw Error(ErrorCode::kAlreadyGenerated,
                "secrets for " + HexEncode(hash) + " already exist");
  }
  std::map<std::string, std::string> values;
  Json names = Json::array();
  for (const auto& spec : it->second.secrets) {
    std::string value;
    switch (spec.kind) {
      case policy::SecretKind::kSymmetricKey256:
        value = HexEncode(crypto::RandomArray<crypto::kAeadKeySize>());
        break;
      case policy::SecretKind::kRandomHex:
        value = HexEncode(crypto::RandomBytes(spec.random_bytes));
        break;
      case policy::SecretKind::kProvidedValue:
        value = *spec.value;
        break;
    }
    values[spec.name] = std::move(value);
    names.push_back({{"name", spec.name}, {"kind", spec.KindName()}});
  }
  fs::path dir = SecretDir(hash);
  fs::path partial = dir;
  partial += ".partial";
  fs::remove_all(partial);
  fs::create_directories(partial);
  for (const auto& [name, value] : values) {
    WriteFileAtomic(partial / (name + ".sealed"),
                    enclave_.Seal(AsBytes(value)).Serialize());
  }
  fs::rename(partial, dir);
  audit_.Append("secrets-generated",
                {{"policy_hash", HexEncode(hash)}, {"secrets", names}});
  secrets_.emplace(hash, std::move(values));
}

policy::InjectionBundle PolicyManager::RequestSecrets(
    const crypto::Digest& hash, std::string_view role,
    const std::optional<std::string>& client_id, ByteView quote_bytes,
    const tee::QuoteNonce& expected_nonce, const attest::ChannelBinding& binding) {
  std::shared_lock lock(mu_);
  auto it = policies_.find(hash);
  if (it == policies_.end()) {
    throw Error(ErrorCode::kNotFound, "no policy " + HexEncode(hash));
  }
  const policy::Policy& p = it->second;
  if (role != policy::kMeasurementCoordinator && role != policy::kMeasurementClient) {
    throw Error(ErrorCode::kRoleUnknown, "unknown role '" + std::string(role) + "'");
  }
  auto sit = secrets_.find(hash);
  if (sit == secrets_.end()) {
    throw Error(ErrorCode::kNotFound, "secrets not generated for " + HexEncode(hash));
  }

  Json record = {{"policy_hash", HexEncode(hash)}, {"role", role}};
  if (client_id) record["client_id"] = *client_id;
  attest::Verdict verdict;
  tee::Quote quote;
  try {
    quote = tee::Quote::Parse(quote_bytes);
    verdict = attest::VerifyQuote(quote, p.AttestationFor(role), expected_nonce,
                                  binding);
  } catch (const Error& e) {
    verdict = attest::Verdict::Reject(attest::Check::kDecode, e.what());
  }
  if (!verdict.accepted()) {
    record["check"] = std::string(attest::CheckName(verdict.failed));
    audit_.Append("access-denied", record);
    throw AccessDenied(std::move(verdict));
  }

  policy::InjectionBundle bundle =
      policy::BuildBundle(p, hash, role, client_id, sit->second);
  record["measurement"] = quote.identity.measurement.Hex();
  Json released = Json::array();
  for (const auto& [var, name] : bundle.environment_secrets) released.push_back(name);
  record["environment_secrets"] = std::move(released);
  audit_.Append("secrets-released", record);
  return bundle;
}

std::optional<policy::Policy> PolicyManager::FindPolicy(const crypto::Digest& hash) const {
  std::shared_lock lock(mu_);
  auto it = policies_.find(hash);
  if (it == policies_.end()) return std::nullopt;
  return it->second;
}

bool PolicyManager::SecretsGenerated(const crypto::Digest& hash) const {
  std::shared_lock lock(mu_);
  return secrets_.contains(hash);
}

}  // namespace efl::pm
