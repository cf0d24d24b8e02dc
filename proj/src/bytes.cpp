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

#include "efl/bytes.hpp"

#include <sodium.h>

#include <bit>
#include <cstring>

#include "efl/error.hpp"

namespace efl {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kDecode: return "decode-error";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kSealAuthentication: return "seal-authentication";
    case ErrorCode::kIntegrity: return "integrity-error";
    case ErrorCode::kHandshake: return "handshake-error";
    case ErrorCode::kAttestationRejected: return "attestation-rejected";
    case ErrorCode::kChannelIntegrity: return "channel-integrity";
    case ErrorCode::kChannelReplay: return "channel-replay";
    case ErrorCode::kChannelClosed: return "channel-closed";
    case ErrorCode::kPolicyInvalid: return "policy-invalid";
    case ErrorCode::kPolicyConflict: return "policy-conflict";
    case ErrorCode::kAlreadyGenerated: return "already-generated";
    case ErrorCode::kAccessDenied: return "access-denied";
    case ErrorCode::kRoleUnknown: return "role-unknown";
    case ErrorCode::kTemplate: return "template-error";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kFreshnessToken: return "freshness-token";
    case ErrorCode::kRollbackDetected: return "rollback-detected";
    case ErrorCode::kKeyResolution: return "key-resolution";
    case ErrorCode::kNumericalDivergence: return "numerical-divergence";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kRoundQuorum: return "round-quorum";
    case ErrorCode::kSessionFailed: return "session-failed";
    case ErrorCode::kRejected: return "rejected";
  }
  return "unknown";
}

std::optional<ErrorCode> ErrorCodeFromName(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kRejected); ++i) {
    auto code = static_cast<ErrorCode>(i);
    if (ErrorCodeName(code) == name) return code;
  }
  return std::nullopt;
}

std::string HexEncode(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

namespace {

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Bytes HexDecode(std::string_view hex) {
  if (hex.size() % 2 != 0) {
    throw Error(ErrorCode::kDecode, "odd-length hex string");
  }
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = HexValue(hex[2 * i]);
    int lo = HexValue(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw Error(ErrorCode::kDecode, "invalid hex character");
    }
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

std::string Base64Encode(ByteView bytes) {
  const int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(),
                    variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

Bytes Base64Decode(std::string_view text) {
  Bytes out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(),
                        nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size()) {
    throw Error(ErrorCode::kDecode, "invalid base64");
  }
  out.resize(len);
  return out;
}

bool Contains(ByteView haystack, ByteView needle) {
  if (needle.empty()) return true;
  return std::search(haystack.begin(), haystack.end(), needle.begin(),
                     needle.end()) != haystack.end();
}

void ByteWriter::U16(std::uint16_t v) {
  U8(static_cast<std::uint8_t>(v >> 8));
  U8(static_cast<std::uint8_t>(v));
}

void ByteWriter::U32(std::uint32_t v) {
  U16(static_cast<std::uint16_t>(v >> 16));
  U16(static_cast<std::uint16_t>(v));
}

void ByteWriter::U64(std::uint64_t v) {
  U32(static_cast<std::uint32_t>(v >> 32));
  U32(static_cast<std::uint32_t>(v));
}

void ByteWriter::F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }

ByteView ByteReader::Raw(std::size_t n) {
  if (n > remaining()) {
    throw Error(ErrorCode::kDecode,
                "truncated input: need " + std::to_string(n) + " bytes, have " +
                    std::to_string(remaining()));
  }
  ByteView out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::U8() { return Raw(1)[0]; }

std::uint16_t ByteReader::U16() {
  auto b = Raw(2);
  return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

std::uint32_t ByteReader::U32() {
  auto b = Raw(4);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

std::uint64_t ByteReader::U64() {
  std::uint64_t hi = U32();
  return (hi << 32) | U32();
}

double ByteReader::F64() { return std::bit_cast<double>(U64()); }

}  // namespace efl
