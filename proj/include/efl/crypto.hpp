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

#ifndef EFL_CRYPTO_HPP_
#define EFL_CRYPTO_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "efl/bytes.hpp"

// Thin wrappers over libsodium. One primitive per job: SHA-256 for hashing,
// Ed25519 for signatures, X25519 for key agreement, ChaCha20-Poly1305 (IETF,
// 96-bit nonce) for authenticated encryption, HKDF-SHA256 for key expansion.
namespace efl::crypto {

inline constexpr std::uint8_t kHashSha256 = 1;
inline constexpr std::uint8_t kSigEd25519 = 1;
inline constexpr std::uint8_t kAeadChaCha20Poly1305 = 1;

inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kSignatureSize = 64;
inline constexpr std::size_t kPublicKeySize = 32;
inline constexpr std::size_t kSeedSize = 32;
inline constexpr std::size_t kAeadKeySize = 32;
inline constexpr std::size_t kAeadNonceSize = 12;
inline constexpr std::size_t kAeadTagSize = 16;

using Digest = std::array<std::uint8_t, kDigestSize>;
using Signature = std::array<std::uint8_t, kSignatureSize>;
using PublicKey = std::array<std::uint8_t, kPublicKeySize>;
using Seed = std::array<std::uint8_t, kSeedSize>;
using AeadKey = std::array<std::uint8_t, kAeadKeySize>;
using AeadNonce = std::array<std::uint8_t, kAeadNonceSize>;

// Must be called before any other function; idempotent and thread-safe.
void Init();

Digest Sha256(ByteView data);

class Sha256Hasher {
 public:
  Sha256Hasher();
  Sha256Hasher& Update(ByteView data);
  Sha256Hasher& Update(std::string_view text) { return Update(AsBytes(text)); }
  Digest Finish();

 private:
  alignas(64) std::array<std::uint8_t, 128> state_{};
};

Digest HmacSha256(ByteView key, ByteView message);

// RFC 5869 HKDF with SHA-256. `length` must not exceed 255 * 32.
Bytes Hkdf(ByteView ikm, ByteView salt, ByteView info, std::size_t length);

void FillRandom(std::span<std::uint8_t> out);
Bytes RandomBytes(std::size_t n);
template <std::size_t N>
std::array<std::uint8_t, N> RandomArray() {
  std::array<std::uint8_t, N> out{};
  FillRandom(out);
  return out;
}

bool ConstantTimeEqual(ByteView a, ByteView b);

// Ed25519 key pair derived from a 32-byte seed; signing is deterministic.
class SigningKey {
 public:
  explicit SigningKey(const Seed& seed);
  static SigningKey Generate();

  const PublicKey& public_key() const { return public_key_; }
  const Seed& seed() const { return seed_; }
  Signature Sign(ByteView message) const;

 private:
  Seed seed_;
  PublicKey public_key_;
  std::array<std::uint8_t, 64> secret_key_;
};

bool VerifySignature(const PublicKey& key, ByteView message,
                     ByteView signature);

// Ephemeral X25519 key pair.
class KeyAgreement {
 public:
  KeyAgreement();

  const PublicKey& public_key() const { return public_key_; }
  // Throws Error(kHandshake) for low-order peer points.
  std::array<std::uint8_t, 32> SharedSecret(ByteView peer_public) const;

 private:
  std::array<std::uint8_t, 32> secret_;
  PublicKey public_key_;
};

// Returns ciphertext || tag.
Bytes AeadSeal(const AeadKey& key, const AeadNonce& nonce, ByteView aad,
               ByteView plaintext);
// Returns nullopt when the tag does not verify.
std::optional<Bytes> AeadOpen(const AeadKey& key, const AeadNonce& nonce,
                              ByteView aad, ByteView ciphertext);

}  // namespace efl::crypto

#endif  // EFL_CRYPTO_HPP_
