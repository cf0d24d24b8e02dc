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

#ifndef EFL_FILE_SHIELD_HPP_
#define EFL_FILE_SHIELD_HPP_

#include <array>
#include <functional>
#include <map>
#include <string_view>

#include "efl/bytes.hpp"
#include "efl/counter_service.hpp"
#include "efl/crypto.hpp"

// Authenticated container for datasets and checkpoints (extension .sfl).
//
//   header: "SFL1" | version u16be | aead_alg u8 | key_id 16B |
//           counter_id 16B | counter_value u64be | nonce 12B
//   body:   AEAD ciphertext+tag, associated data = the 59 header bytes
//
// A file decrypts only when its header counter value equals the counter's
// current stable value, so both stale copies and forward-dated ones fail.
namespace efl::shield {

inline constexpr std::string_view kMagic = "SFL1";
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kKeyIdSize = 16;
using KeyId = std::array<std::uint8_t, kKeyIdSize>;

// Stable identifier for the key held in the named policy secret.
KeyId KeyIdFor(std::string_view secret_name);

struct ShieldHeader {
  std::uint16_t version = kVersion;
  std::uint8_t aead_alg = crypto::kAeadChaCha20Poly1305;
  KeyId key_id{};
  counter::CounterId counter_id{};
  std::uint64_t counter_value = 0;
  crypto::AeadNonce nonce{};

  Bytes Serialize() const;
  static constexpr std::size_t kSize = 4 + 2 + 1 + kKeyIdSize +
                                       counter::kCounterIdSize + 8 +
                                       crypto::kAeadNonceSize;
};

struct ShieldedFile {
  ShieldHeader header;
  Bytes body;

  Bytes Serialize() const;
  // Parses the header only; Error(kDecode) on bad magic, version or size.
  static ShieldedFile Parse(ByteView bytes);
};

// Error(kFreshnessToken) unless `token` verifies under `counter_key` and has
// a positive value. Provisional tokens are accepted.
ShieldedFile ShieldEncrypt(ByteView plaintext, const crypto::AeadKey& key,
                           const KeyId& key_id,
                           const counter::CounterToken& token,
                           const crypto::PublicKey& counter_key);

namespace detail {
// Fixed-nonce variant for golden fixtures.
ShieldedFile ShieldEncryptWithNonce(ByteView plaintext,
                                    const crypto::AeadKey& key,
                                    const KeyId& key_id,
                                    const counter::CounterToken& token,
                                    const crypto::PublicKey& counter_key,
                                    const crypto::AeadNonce& nonce);
}  // namespace detail

// Returns the current stable token for a counter.
using FreshnessLookup =
    std::function<counter::CounterToken(const counter::CounterId&)>;
FreshnessLookup StableLookup(counter::CounterClient& counters);

// Error(kIntegrity) on tag failure, Error(kRollbackDetected) when the header
// value differs from the stable value, Error(kFreshnessToken) when the lookup
// returns an invalid or provisional token.
Bytes ShieldDecrypt(const ShieldedFile& file, const crypto::AeadKey& key,
                    const FreshnessLookup& freshness,
                    const crypto::PublicKey& counter_key);

class KeyRing {
 public:
  void Add(const KeyId& id, const crypto::AeadKey& key) { keys_[id] = key; }
  // Error(kKeyResolution) for unknown ids.
  const crypto::AeadKey& Resolve(const KeyId& id) const;

 private:
  std::map<KeyId, crypto::AeadKey> keys_;
};

Bytes ShieldDecrypt(const ShieldedFile& file, const KeyRing& keys,
                    const FreshnessLookup& freshness,
                    const crypto::PublicKey& counter_key);

}  // namespace efl::shield

#endif  // EFL_FILE_SHIELD_HPP_
