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

#ifndef EFL_SIM_TEE_HPP_
#define EFL_SIM_TEE_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "efl/bytes.hpp"
#include "efl/crypto.hpp"

// Software stand-in for an enclave runtime. Nothing here isolates memory: the
// trust boundary is a convention that the rest of the system and its tests
// respect, and the key file is readable by whoever runs the platform.
namespace efl::tee {

inline constexpr std::uint16_t kQuoteVersion = 1;
inline constexpr std::size_t kReportDataSize = 64;
inline constexpr std::size_t kQuoteNonceSize = 32;
inline constexpr std::size_t kPlatformIdSize = 16;

using PlatformId = std::array<std::uint8_t, kPlatformIdSize>;
using ReportData = std::array<std::uint8_t, kReportDataSize>;
using QuoteNonce = std::array<std::uint8_t, kQuoteNonceSize>;

struct Measurement {
  crypto::Digest digest{};

  std::string Hex() const { return HexEncode(digest); }
  static Measurement FromHex(std::string_view hex);

  auto operator<=>(const Measurement&) const = default;
};

// SHA-256 over u64be(|code|) || code || u64be(|config|) || config.
// Throws Error(kInvalidInput) if either input is empty.
Measurement Measure(ByteView code_bundle, ByteView config);

struct EnclaveIdentity {
  Measurement measurement;
  PlatformId platform_id{};
  std::uint16_t svn = 0;

  bool operator==(const EnclaveIdentity&) const = default;
};

struct Quote {
  std::uint16_t version = kQuoteVersion;
  EnclaveIdentity identity;
  ReportData report_data{};
  QuoteNonce nonce{};
  crypto::Signature signature{};

  // Bytes covered by the signature: every field before it.
  Bytes SignedBytes() const;
  Bytes Serialize() const;
  // Throws Error(kDecode) on length, version or algorithm mismatch.
  static Quote Parse(ByteView bytes);

  static constexpr std::size_t kSerializedSize =
      2 + 1 + 1 + crypto::kDigestSize + kPlatformIdSize + 2 +
      kReportDataSize + kQuoteNonceSize + crypto::kSignatureSize;
};

// Blob layout: "SSB1" | hash_alg u8 | aead_alg u8 | measurement 32B |
// platform_id 16B | nonce 12B | u64be ciphertext length | ciphertext+tag.
struct SealedBlob {
  Measurement sealing_measurement;
  PlatformId platform_id{};
  crypto::AeadNonce nonce{};
  Bytes ciphertext;

  Bytes Serialize() const;
  static SealedBlob Parse(ByteView bytes);
};

// Operator-held key material for one simulated platform.
struct PlatformKeys {
  PlatformId platform_id{};
  crypto::Seed root_seed{};
  std::array<std::uint8_t, 32> platform_secret{};

  static PlatformKeys Generate();
  void Save(const std::filesystem::path& path) const;
  static PlatformKeys Load(const std::filesystem::path& path);
};

class Enclave;

class Platform {
 public:
  explicit Platform(const PlatformKeys& keys);

  const PlatformId& platform_id() const;
  const crypto::PublicKey& root_public_key() const;

  Enclave Spawn(ByteView code_bundle, ByteView config,
                std::uint16_t svn = 1) const;

 private:
  struct State;
  std::shared_ptr<const State> state_;

  friend class Enclave;
};

// Immutable handle to a running simulated enclave. Copies share the same
// platform state; all methods are safe to call concurrently.
class Enclave {
 public:
  const EnclaveIdentity& identity() const { return identity_; }
  const Measurement& measurement() const { return identity_.measurement; }
  const crypto::PublicKey& platform_root() const;

  // report_data must be 64 bytes and nonce 32 bytes (Error(kInvalidInput)).
  Quote GenerateQuote(ByteView report_data, ByteView nonce) const;

  SealedBlob Seal(ByteView plaintext) const;
  // Error(kSealAuthentication) when the blob belongs to another measurement or
  // platform, Error(kIntegrity) when the tag does not verify.
  Bytes Unseal(const SealedBlob& blob) const;

  // Key bound to (platform secret, measurement, label); stable across
  // restarts of the same code on the same platform.
  std::array<std::uint8_t, 32> DeriveKey(std::string_view label) const;

 private:
  Enclave(std::shared_ptr<const Platform::State> platform,
          EnclaveIdentity identity);

  std::shared_ptr<const Platform::State> platform_;
  EnclaveIdentity identity_;

  friend class Platform;
};

}  // namespace efl::tee

#endif  // EFL_SIM_TEE_HPP_
