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

#include "efl/sim_tee.hpp"

#include <fstream>
#include <sstream>

#include "efl/canonical.hpp"
#include "efl/error.hpp"

namespace efl::tee {

namespace {

constexpr std::string_view kSealMagic = "SSB1";
constexpr std::string_view kSealSalt = "efl/sim-tee/seal/v1";

Bytes SealAad(const Measurement& m, const PlatformId& platform) {
  Bytes aad(m.digest.begin(), m.digest.end());
  aad.insert(aad.end(), platform.begin(), platform.end());
  return aad;
}

}  // namespace

Measurement Measurement::FromHex(std::string_view hex) {
  return Measurement{HexDecodeFixed<crypto::kDigestSize>(hex)};
}

Measurement Measure(ByteView code_bundle, ByteView config) {
  if (code_bundle.empty()) {
    throw Error(ErrorCode::kInvalidInput, "code bundle is empty");
  }
  if (config.empty()) {
    throw Error(ErrorCode::kInvalidInput, "config is empty");
  }
  crypto::Sha256Hasher h;
  ByteWriter code_len;
  code_len.U64(code_bundle.size());
  ByteWriter config_len;
  config_len.U64(config.size());
  h.Update(code_len.bytes()).Update(code_bundle);
  h.Update(config_len.bytes()).Update(config);
  return Measurement{h.Finish()};
}

Bytes Quote::SignedBytes() const {
  ByteWriter w;
  w.U16(version);
  w.U8(crypto::kHashSha256);
  w.U8(crypto::kSigEd25519);
  w.Raw(identity.measurement.digest);
  w.Raw(identity.platform_id);
  w.U16(identity.svn);
  w.Raw(report_data);
  w.Raw(nonce);
  return std::move(w).Take();
}

Bytes Quote::Serialize() const {
  Bytes out = SignedBytes();
  out.insert(out.end(), signature.begin(), signature.end());
  return out;
}

Quote Quote::Parse(ByteView bytes) {
  if (bytes.size() != kSerializedSize) {
    throw Error(ErrorCode::kDecode,
                "quote must be " + std::to_string(kSerializedSize) +
                    " bytes, got " + std::to_string(bytes.size()));
  }
  ByteReader r(bytes);
  Quote q;
  q.version = r.U16();
  if (q.version != kQuoteVersion) {
    throw Error(ErrorCode::kDecode,
                "unsupported quote version " + std::to_string(q.version));
  }
  if (r.U8() != crypto::kHashSha256 || r.U8() != crypto::kSigEd25519) {
    throw Error(ErrorCode::kDecode, "unsupported quote algorithm identifiers");
  }
  q.identity.measurement.digest = r.Fixed<crypto::kDigestSize>();
  q.identity.platform_id = r.Fixed<kPlatformIdSize>();
  q.identity.svn = r.U16();
  q.report_data = r.Fixed<kReportDataSize>();
  q.nonce = r.Fixed<kQuoteNonceSize>();
  q.signature = r.Fixed<crypto::kSignatureSize>();
  return q;
}

Bytes SealedBlob::Serialize() const {
  ByteWriter w;
  w.Raw(AsBytes(kSealMagic));
  w.U8(crypto::kHashSha256);
  w.U8(crypto::kAeadChaCha20Poly1305);
  w.Raw(sealing_measurement.digest);
  w.Raw(platform_id);
  w.Raw(nonce);
  w.U64(ciphertext.size());
  w.Raw(ciphertext);
  return std::move(w).Take();
}

SealedBlob SealedBlob::Parse(ByteView bytes) {
  ByteReader r(bytes);
  if (ToString(r.Raw(kSealMagic.size())) != kSealMagic) {
    throw Error(ErrorCode::kDecode, "not a sealed blob (bad magic)");
  }
  if (r.U8() != crypto::kHashSha256 ||
      r.U8() != crypto::kAeadChaCha20Poly1305) {
    throw Error(ErrorCode::kDecode, "unsupported sealed blob algorithms");
  }
  SealedBlob blob;
  blob.sealing_measurement.digest = r.Fixed<crypto::kDigestSize>();
  blob.platform_id = r.Fixed<kPlatformIdSize>();
  blob.nonce = r.Fixed<crypto::kAeadNonceSize>();
  std::uint64_t len = r.U64();
  if (len != r.remaining()) {
    throw Error(ErrorCode::kDecode, "sealed blob length field mismatch");
  }
  auto ct = r.Rest();
  blob.ciphertext.assign(ct.begin(), ct.end());
  return blob;
}

PlatformKeys PlatformKeys::Generate() {
  PlatformKeys keys;
  crypto::FillRandom(keys.platform_id);
  crypto::FillRandom(keys.root_seed);
  crypto::FillRandom(keys.platform_secret);
  return keys;
}

void PlatformKeys::Save(const std::filesystem::path& path) const {
  Json doc = {
      {"platform_id", HexEncode(platform_id)},
      {"root_seed", HexEncode(root_seed)},
      {"platform_secret", HexEncode(platform_secret)},
      {"root_public_key",
       HexEncode(crypto::SigningKey(root_seed).public_key())},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << doc.dump(2) << "\n";
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write key file " + path.string());
  }
}

PlatformKeys PlatformKeys::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot read key file " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  Json doc = ParseJson(ss.str());
  PlatformKeys keys;
  keys.platform_id =
      HexDecodeFixed<kPlatformIdSize>(RequireString(doc, "platform_id"));
  keys.root_seed =
      HexDecodeFixed<crypto::kSeedSize>(RequireString(doc, "root_seed"));
  keys.platform_secret =
      HexDecodeFixed<32>(RequireString(doc, "platform_secret"));
  return keys;
}

struct Platform::State {
  explicit State(const PlatformKeys& k)
      : keys(k), signer(k.root_seed) {}

  PlatformKeys keys;
  crypto::SigningKey signer;
};

Platform::Platform(const PlatformKeys& keys) {
  crypto::Init();
  state_ = std::make_shared<const State>(keys);
}

const PlatformId& Platform::platform_id() const {
  return state_->keys.platform_id;
}

const crypto::PublicKey& Platform::root_public_key() const {
  return state_->signer.public_key();
}

Enclave Platform::Spawn(ByteView code_bundle, ByteView config,
                        std::uint16_t svn) const {
  EnclaveIdentity identity{Measure(code_bundle, config),
                           state_->keys.platform_id, svn};
  return Enclave(state_, identity);
}

Enclave::Enclave(std::shared_ptr<const Platform::State> platform,
                 EnclaveIdentity identity)
    : platform_(std::move(platform)), identity_(identity) {}

const crypto::PublicKey& Enclave::platform_root() const {
  return platform_->signer.public_key();
}

Quote Enclave::GenerateQuote(ByteView report_data, ByteView nonce) const {
  if (report_data.size() != kReportDataSize) {
    throw Error(ErrorCode::kInvalidInput, "report_data must be 64 bytes");
  }
  if (nonce.size() != kQuoteNonceSize) {
    throw Error(ErrorCode::kInvalidInput, "quote nonce must be 32 bytes");
  }
  Quote q;
  q.identity = identity_;
  std::copy(report_data.begin(), report_data.end(), q.report_data.begin());
  std::copy(nonce.begin(), nonce.end(), q.nonce.begin());
  q.signature = platform_->signer.Sign(q.SignedBytes());
  return q;
}

std::array<std::uint8_t, 32> Enclave::DeriveKey(std::string_view label) const {
  Bytes info(identity_.measurement.digest.begin(),
             identity_.measurement.digest.end());
  info.insert(info.end(), label.begin(), label.end());
  Bytes okm = crypto::Hkdf(platform_->keys.platform_secret,
                           AsBytes(kSealSalt), info, 32);
  std::array<std::uint8_t, 32> key{};
  std::copy(okm.begin(), okm.end(), key.begin());
  return key;
}

SealedBlob Enclave::Seal(ByteView plaintext) const {
  SealedBlob blob;
  blob.sealing_measurement = identity_.measurement;
  blob.platform_id = identity_.platform_id;
  crypto::FillRandom(blob.nonce);
  blob.ciphertext =
      crypto::AeadSeal(DeriveKey("seal"), blob.nonce,
                       SealAad(blob.sealing_measurement, blob.platform_id),
                       plaintext);
  return blob;
}

Bytes Enclave::Unseal(const SealedBlob& blob) const {
  if (blob.sealing_measurement != identity_.measurement) {
    throw Error(ErrorCode::kSealAuthentication,
                "blob was sealed by a different measurement");
  }
  if (blob.platform_id != identity_.platform_id) {
    throw Error(ErrorCode::kSealAuthentication,
                "blob was sealed on a different platform");
  }
  auto plain = crypto::AeadOpen(DeriveKey("seal"), blob.nonce,
                                SealAad(identity_.measurement,
                                        identity_.platform_id),
                                blob.ciphertext);
  if (!plain) {
    throw Error(ErrorCode::kIntegrity, "sealed blob failed authentication");
  }
  return std::move(*plain);
}

}  // namespace efl::tee
