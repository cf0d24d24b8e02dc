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

#include "efl/file_shield.hpp"

#include "efl/error.hpp"

namespace efl::shield {

KeyId KeyIdFor(std::string_view secret_name) {
  crypto::Sha256Hasher h;
  h.Update("efl/key-id/v1").Update(secret_name);
  crypto::Digest d = h.Finish();
  KeyId id{};
  std::copy_n(d.begin(), kKeyIdSize, id.begin());
  return id;
}

Bytes ShieldHeader::Serialize() const {
  ByteWriter w;
  w.Raw(AsBytes(kMagic));
  w.U16(version);
  w.U8(aead_alg);
  w.Raw(key_id);
  w.Raw(counter_id);
  w.U64(counter_value);
  w.Raw(nonce);
  return std::move(w).Take();
}

Bytes ShieldedFile::Serialize() const {
  Bytes out = header.Serialize();
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

ShieldedFile ShieldedFile::Parse(ByteView bytes) {
  if (bytes.size() < ShieldHeader::kSize + crypto::kAeadTagSize) {
    throw Error(ErrorCode::kDecode, "shielded file too short");
  }
  ByteReader r(bytes);
  if (ToString(r.Raw(kMagic.size())) != kMagic) {
    throw Error(ErrorCode::kDecode, "not a shielded file (bad magic)");
  }
  ShieldedFile f;
  f.header.version = r.U16();
  if (f.header.version != kVersion) {
    throw Error(ErrorCode::kDecode, "unsupported shielded file version " +
                                        std::to_string(f.header.version));
  }
  f.header.aead_alg = r.U8();
  if (f.header.aead_alg != crypto::kAeadChaCha20Poly1305) {
    throw Error(ErrorCode::kDecode, "unsupported AEAD algorithm");
  }
  f.header.key_id = r.Fixed<kKeyIdSize>();
  f.header.counter_id = r.Fixed<counter::kCounterIdSize>();
  f.header.counter_value = r.U64();
  f.header.nonce = r.Fixed<crypto::kAeadNonceSize>();
  auto body = r.Rest();
  f.body.assign(body.begin(), body.end());
  return f;
}

namespace detail {

ShieldedFile ShieldEncryptWithNonce(ByteView plaintext,
                                    const crypto::AeadKey& key,
                                    const KeyId& key_id,
                                    const counter::CounterToken& token,
                                    const crypto::PublicKey& counter_key,
                                    const crypto::AeadNonce& nonce) {
  if (!token.Verify(counter_key)) {
    throw Error(ErrorCode::kFreshnessToken,
                "counter token signature does not verify");
  }
  if (token.value == 0) {
    throw Error(ErrorCode::kFreshnessToken, "counter value must be positive");
  }
  ShieldedFile f;
  f.header.key_id = key_id;
  f.header.counter_id = token.counter_id;
  f.header.counter_value = token.value;
  f.header.nonce = nonce;
  f.body = crypto::AeadSeal(key, nonce, f.header.Serialize(), plaintext);
  return f;
}

}  // namespace detail

ShieldedFile ShieldEncrypt(ByteView plaintext, const crypto::AeadKey& key,
                           const KeyId& key_id,
                           const counter::CounterToken& token,
                           const crypto::PublicKey& counter_key) {
  crypto::AeadNonce nonce{};
  crypto::FillRandom(nonce);
  return detail::ShieldEncryptWithNonce(plaintext, key, key_id, token,
                                        counter_key, nonce);
}

FreshnessLookup StableLookup(counter::CounterClient& counters) {
  return [&counters](const counter::CounterId& id) {
    return counters.ReadStable(id);
  };
}

Bytes ShieldDecrypt(const ShieldedFile& file, const crypto::AeadKey& key,
                    const FreshnessLookup& freshness,
                    const crypto::PublicKey& counter_key) {
  auto plain = crypto::AeadOpen(key, file.header.nonce,
                                file.header.Serialize(), file.body);
  if (!plain) {
    throw Error(ErrorCode::kIntegrity, "shielded file failed authentication");
  }
  counter::CounterToken current = freshness(file.header.counter_id);
  if (!current.Verify(counter_key) || !current.stable ||
      current.counter_id != file.header.counter_id) {
    throw Error(ErrorCode::kFreshnessToken,
                "freshness lookup returned an invalid token");
  }
  if (current.value != file.header.counter_value) {
    throw Error(ErrorCode::kRollbackDetected,
                "file written at counter value " +
                    std::to_string(file.header.counter_value) +
                    ", current stable value is " +
                    std::to_string(current.value));
  }
  return std::move(*plain);
}

const crypto::AeadKey& KeyRing::Resolve(const KeyId& id) const {
  auto it = keys_.find(id);
  if (it == keys_.end()) {
    throw Error(ErrorCode::kKeyResolution, "no key for id " + HexEncode(id));
  }
  return it->second;
}

Bytes ShieldDecrypt(const ShieldedFile& file, const KeyRing& keys,
                    const FreshnessLookup& freshness,
                    const crypto::PublicKey& counter_key) {
  return ShieldDecrypt(file, keys.Resolve(file.header.key_id), freshness,
                       counter_key);
}

}  // namespace efl::shield
