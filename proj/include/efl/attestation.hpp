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

#ifndef EFL_ATTESTATION_HPP_
#define EFL_ATTESTATION_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "efl/crypto.hpp"
#include "efl/error.hpp"
#include "efl/sim_tee.hpp"
#include "efl/transport.hpp"

namespace efl::attest {

inline constexpr std::string_view kRoleClient = "client";
inline constexpr std::string_view kRoleCoordinator = "coordinator";
inline constexpr std::string_view kRolePolicyManager = "policy-manager";
inline constexpr std::string_view kRoleOperator = "operator";

// Verification checks, in the order they are evaluated. A rejection names
// the first check that failed.
enum class Check { kNone, kDecode, kSignature, kNonce, kMeasurement, kSvn, kBinding };

std::string_view CheckName(Check check);

struct Verdict {
  Check failed = Check::kNone;
  std::string detail;

  bool accepted() const { return failed == Check::kNone; }
  static Verdict Accept() { return {}; }
  static Verdict Reject(Check check, std::string detail) {
    return {check, std::move(detail)};
  }
};

struct AttestationPolicy {
  // A quote is genuine if its signature verifies under any of these roots.
  std::vector<crypto::PublicKey> trusted_roots;
  std::vector<tee::Measurement> expected_measurements;
  std::uint16_t min_svn = 0;

  // Error(kInvalidInput) when no roots or no measurements are pinned.
  void Validate() const;
};

class RejectedError : public Error {
 public:
  explicit RejectedError(Verdict verdict)
      : Error(ErrorCode::kAttestationRejected,
              std::string(CheckName(verdict.failed)) + ": " + verdict.detail),
        verdict_(std::move(verdict)) {}

  const Verdict& verdict() const { return verdict_; }

 private:
  Verdict verdict_;
};

// report_data = SHA-256(ephemeral_public_key || role || session_nonce)
// followed by 32 zero bytes.
struct ChannelBinding {
  crypto::PublicKey ephemeral_public_key{};
  std::string role;
  tee::QuoteNonce session_nonce{};

  tee::ReportData ReportData() const;
};

// Pure: the verdict depends only on the arguments.
Verdict VerifyQuote(const tee::Quote& quote, const AttestationPolicy& policy,
                    ByteView expected_nonce);
// Same, followed by the channel-binding check against `binding`.
Verdict VerifyQuote(const tee::Quote& quote, const AttestationPolicy& policy,
                    ByteView expected_nonce, const ChannelBinding& binding);

// Produces serialized quote bytes for (report_data, nonce). Tests substitute
// misbehaving sources to model forged or replayed evidence.
using QuoteSource =
    std::function<Bytes(const tee::ReportData&, const tee::QuoteNonce&)>;
QuoteSource QuoteFrom(const tee::Enclave& enclave);

enum class HandshakeMessage : std::uint8_t {
  kHello = 1,
  kKeyShare = 2,
  kQuote = 3,
  kFinish = 4,
};

// u32be(1 + |payload|) | type | payload
Bytes EncodeHandshakeFrame(HandshakeMessage type, ByteView payload);

struct HandshakeOptions {
  std::string role;
  // Empty: this side presents no quote.
  QuoteSource attester;
  // nullopt: the peer's quote is recorded but not checked during the
  // handshake (used by services that authorize later, per request).
  std::optional<AttestationPolicy> peer_policy;
  net::Millis timeout{30'000};
};

// What the handshake learned about the peer.
struct PeerEvidence {
  std::string role;
  // Nonce this side issued; the peer's quote must carry it.
  tee::QuoteNonce issued_nonce{};
  crypto::PublicKey ephemeral_public_key{};
  Bytes quote;
  // Set when the quote was verified during the handshake.
  std::optional<tee::EnclaveIdentity> verified_identity;

  ChannelBinding Binding() const {
    return {ephemeral_public_key, role, issued_nonce};
  }
};

// AEAD-framed channel with one key and one monotone counter per direction.
// Post-handshake frames: u32be length | u64be counter | ciphertext+tag, with
// the counter bytes as associated data. Any integrity or replay failure
// closes the channel. One sender and one receiver at a time.
class SecureChannel {
 public:
  SecureChannel(std::unique_ptr<net::Transport> transport,
                const crypto::AeadKey& send_key,
                const crypto::AeadKey& receive_key, PeerEvidence peer,
                ChannelBinding local = {});
  SecureChannel(SecureChannel&&) noexcept = default;
  SecureChannel& operator=(SecureChannel&&) noexcept = default;
  ~SecureChannel();

  void Send(ByteView payload);
  Bytes Receive(net::Millis timeout = net::Millis(30'000));
  void Close();

  bool closed() const { return closed_; }
  const PeerEvidence& peer() const { return peer_; }
  // This side's ephemeral key, role and the nonce the peer issued; a quote
  // over it proves possession of this channel to the peer.
  const ChannelBinding& local_binding() const { return local_; }

 private:
  [[noreturn]] void Fail(ErrorCode code, const std::string& message);

  std::unique_ptr<net::Transport> transport_;
  crypto::AeadKey send_key_{};
  crypto::AeadKey receive_key_{};
  std::uint64_t send_counter_ = 0;
  std::uint64_t receive_counter_ = 0;
  bool closed_ = false;
  PeerEvidence peer_;
  ChannelBinding local_;
};

// Symmetric mutual handshake: HELLO (nonce, role), KEYSHARE (X25519 public
// key), QUOTE (binding the key share to the peer's nonce), FINISH (transcript
// MAC). Throws RejectedError when the peer's evidence is refused and
// Error(kHandshake) for protocol or key-exchange failures; the transport is
// closed in both cases before any application payload is exchanged.
SecureChannel AttestedHandshake(std::unique_ptr<net::Transport> transport,
                                const HandshakeOptions& options);

}  // namespace efl::attest

#endif  // EFL_ATTESTATION_HPP_
