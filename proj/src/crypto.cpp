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

#include "efl/crypto.hpp"

#include <sodium.h>

#include <mutex>

#include "efl/error.hpp"

namespace efl::crypto {

static_assert(sizeof(crypto_hash_sha256_state) <= 128);

void Init() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) {
      throw Error(ErrorCode::kIo, "libsodium initialization failed");
    }
  });
}

Digest Sha256(ByteView data) {
  Digest out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

Sha256Hasher::Sha256Hasher() {
  crypto_hash_sha256_init(
      reinterpret_cast<crypto_hash_sha256_state*>(state_.data()));
}

Sha256Hasher& Sha256Hasher::Update(ByteView data) {
  crypto_hash_sha256_update(
      reinterpret_cast<crypto_hash_sha256_state*>(state_.data()), data.data(),
      data.size());
  return *this;
}

Digest Sha256Hasher::Finish() {
  Digest out{};
  crypto_hash_sha256_final(
      reinterpret_cast<crypto_hash_sha256_state*>(state_.data()), out.data());
  return out;
}

Digest HmacSha256(ByteView key, ByteView message) {
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, message.data(), message.size());
  Digest out{};
  crypto_auth_hmacsha256_final(&st, out.data());
  sodium_memzero(&st, sizeof st);
  return out;
}

Bytes Hkdf(ByteView ikm, ByteView salt, ByteView info, std::size_t length) {
  if (length > 255 * kDigestSize) {
    throw Error(ErrorCode::kInvalidInput, "HKDF output too long");
  }
  Digest zero_salt{};
  Digest prk = HmacSha256(salt.empty() ? ByteView(zero_salt) : salt, ikm);

  Bytes okm;
  okm.reserve(length);
  Bytes block;
  for (std::uint8_t counter = 1; okm.size() < length; ++counter) {
    Bytes msg = block;
    msg.insert(msg.end(), info.begin(), info.end());
    msg.push_back(counter);
    Digest t = HmacSha256(prk, msg);
    block.assign(t.begin(), t.end());
    std::size_t take = std::min(length - okm.size(), block.size());
    okm.insert(okm.end(), block.begin(), block.begin() + take);
  }
  sodium_memzero(prk.data(), prk.size());
  return okm;
}

void FillRandom(std::span<std::uint8_t> out) {
  Init();
  randombytes_buf(out.data(), out.size());
}

Bytes RandomBytes(std::size_t n) {
  Bytes out(n);
  FillRandom(out);
  return out;
}

bool ConstantTimeEqual(ByteView a, ByteView b) {
  return a.size() == b.size() &&
         (a.empty() || sodium_memcmp(a.data(), b.data(), a.size()) == 0);
}

SigningKey::SigningKey(const Seed& seed) : seed_(seed) {
  crypto_sign_ed25519_seed_keypair(public_key_.data(), secret_key_.data(),
                                   seed_.data());
}

SigningKey SigningKey::Generate() { return SigningKey(RandomArray<kSeedSize>()); }

Signature SigningKey::Sign(ByteView message) const {
  Signature sig{};
  crypto_sign_ed25519_detached(sig.data(), nullptr, message.data(),
                               message.size(), secret_key_.data());
  return sig;
}

bool VerifySignature(const PublicKey& key, ByteView message,
                     ByteView signature) {
  if (signature.size() != kSignatureSize) return false;
  return crypto_sign_ed25519_verify_detached(signature.data(), message.data(),
                                             message.size(), key.data()) == 0;
}

KeyAgreement::KeyAgreement() {
  FillRandom(secret_);
  crypto_scalarmult_base(public_key_.data(), secret_.data());
}

std::array<std::uint8_t, 32> KeyAgreement::SharedSecret(
    ByteView peer_public) const {
  if (peer_public.size() != kPublicKeySize) {
    throw Error(ErrorCode::kHandshake, "peer key share has wrong length");
  }
  std::array<std::uint8_t, 32> shared{};
  if (crypto_scalarmult(shared.data(), secret_.data(), peer_public.data()) !=
      0) {
    throw Error(ErrorCode::kHandshake, "degenerate peer key share");
  }
  return shared;
}

Bytes AeadSeal(const AeadKey& key, const AeadNonce& nonce, ByteView aad,
               ByteView plaintext) {
  Bytes out(plaintext.size() + kAeadTagSize);
  unsigned long long out_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(
      out.data(), &out_len, plaintext.data(), plaintext.size(), aad.data(),
      aad.size(), nullptr, nonce.data(), key.data());
  out.resize(out_len);
  return out;
}

std::optional<Bytes> AeadOpen(const AeadKey& key, const AeadNonce& nonce,
                              ByteView aad, ByteView ciphertext) {
  if (ciphertext.size() < kAeadTagSize) return std::nullopt;
  Bytes out(ciphertext.size() - kAeadTagSize);
  unsigned long long out_len = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(
          out.data(), &out_len, nullptr, ciphertext.data(), ciphertext.size(),
          aad.data(), aad.size(), nonce.data(), key.data()) != 0) {
    return std::nullopt;
  }
  out.resize(out_len);
  return out;
}

}  // namespace efl::crypto
