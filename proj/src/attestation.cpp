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

#include "efl/attestation.hpp"

#include <algorithm>

namespace efl::attest {

namespace {

constexpr std::string_view kTranscriptLabel = "efl/handshake/v1";
constexpr std::string_view kChannelInfo = "efl/channel/v1";
constexpr std::size_t kMaxRoleLength = 64;

Bytes ReceiveHandshake(net::Transport& transport, HandshakeMessage expected,
                       net::Millis timeout) {
  Bytes frame;
  try {
    frame = transport.Receive(timeout);
  } catch (const Error& e) {
    throw Error(ErrorCode::kHandshake,
                std::string("peer went away during handshake (") + e.what() +
                    ")");
  }
  ByteReader r(frame);
  if (frame.size() < 5 || r.U32() != frame.size() - 4) {
    throw Error(ErrorCode::kHandshake, "malformed handshake frame");
  }
  auto type = r.U8();
  if (type != static_cast<std::uint8_t>(expected)) {
    throw Error(ErrorCode::kHandshake,
                "unexpected handshake message type " + std::to_string(type));
  }
  auto payload = r.Rest();
  return {payload.begin(), payload.end()};
}

void SendHandshake(net::Transport& transport, HandshakeMessage type,
                   ByteView payload) {
  try {
    transport.Send(EncodeHandshakeFrame(type, payload));
  } catch (const Error& e) {
    throw Error(ErrorCode::kHandshake,
                std::string("cannot send handshake message (") + e.what() +
                    ")");
  }
}

void AppendField(Bytes& out, ByteView field) {
  ByteWriter w;
  w.U32(static_cast<std::uint32_t>(field.size()));
  w.Raw(field);
  out.insert(out.end(), w.bytes().begin(), w.bytes().end());
}

crypto::AeadNonce CounterNonce(std::uint64_t counter) {
  crypto::AeadNonce nonce{};
  for (int i = 0; i < 8; ++i) {
    nonce[4 + i] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
  }
  return nonce;
}

}  // namespace

std::string_view CheckName(Check check) {
  switch (check) {
    case Check::kNone: return "accepted";
    case Check::kDecode: return "decode";
    case Check::kSignature: return "signature-invalid";
    case Check::kNonce: return "nonce-mismatch";
    case Check::kMeasurement: return "measurement-mismatch";
    case Check::kSvn: return "svn-too-low";
    case Check::kBinding: return "binding-mismatch";
  }
  return "unknown";
}

void AttestationPolicy::Validate() const {
  if (trusted_roots.empty()) {
    throw Error(ErrorCode::kInvalidInput, "attestation policy pins no roots");
  }
  if (expected_measurements.empty()) {
    throw Error(ErrorCode::kInvalidInput,
                "attestation policy pins no measurements");
  }
}

tee::ReportData ChannelBinding::ReportData() const {
  crypto::Sha256Hasher h;
  h.Update(ephemeral_public_key).Update(role).Update(session_nonce);
  crypto::Digest d = h.Finish();
  tee::ReportData rd{};
  std::copy(d.begin(), d.end(), rd.begin());
  return rd;
}

Verdict VerifyQuote(const tee::Quote& quote, const AttestationPolicy& policy,
                    ByteView expected_nonce) {
  Bytes signed_bytes = quote.SignedBytes();
  bool genuine = std::any_of(
      policy.trusted_roots.begin(), policy.trusted_roots.end(),
      [&](const crypto::PublicKey& root) {
        return crypto::VerifySignature(root, signed_bytes, quote.signature);
      });
  if (!genuine) {
    return Verdict::Reject(Check::kSignature,
                           "signature does not verify under a trusted root");
  }
  if (!crypto::ConstantTimeEqual(quote.nonce, expected_nonce)) {
    return Verdict::Reject(Check::kNonce, "quote carries a stale nonce");
  }
  const auto& m = quote.identity.measurement;
  if (std::find(policy.expected_measurements.begin(),
                policy.expected_measurements.end(),
                m) == policy.expected_measurements.end()) {
    return Verdict::Reject(Check::kMeasurement,
                           "measurement " + m.Hex() + " is not pinned");
  }
  if (quote.identity.svn < policy.min_svn) {
    return Verdict::Reject(Check::kSvn,
                           "svn " + std::to_string(quote.identity.svn) +
                               " below minimum " +
                               std::to_string(policy.min_svn));
  }
  return Verdict::Accept();
}

Verdict VerifyQuote(const tee::Quote& quote, const AttestationPolicy& policy,
                    ByteView expected_nonce, const ChannelBinding& binding) {
  Verdict v = VerifyQuote(quote, policy, expected_nonce);
  if (!v.accepted()) return v;
  if (!crypto::ConstantTimeEqual(quote.report_data, binding.ReportData())) {
    return Verdict::Reject(Check::kBinding,
                           "report data does not bind the channel key");
  }
  return v;
}

QuoteSource QuoteFrom(const tee::Enclave& enclave) {
  return [enclave](const tee::ReportData& rd, const tee::QuoteNonce& nonce) {
    return enclave.GenerateQuote(rd, nonce).Serialize();
  };
}

Bytes EncodeHandshakeFrame(HandshakeMessage type, ByteView payload) {
  ByteWriter w;
  w.U32(static_cast<std::uint32_t>(1 + payload.size()));
  w.U8(static_cast<std::uint8_t>(type));
  w.Raw(payload);
  return std::move(w).Take();
}

SecureChannel::SecureChannel(std::unique_ptr<net::Transport> transport,
                             const crypto::AeadKey& send_key,
                             const crypto::AeadKey& receive_key,
                             PeerEvidence peer, ChannelBinding local)
    : transport_(std::move(transport)),
      send_key_(send_key),
      receive_key_(receive_key),
      peer_(std::move(peer)),
      local_(std::move(local)) {}

SecureChannel::~SecureChannel() {
  if (transport_) transport_->Close();
}

void SecureChannel::Close() {
  closed_ = true;
  if (transport_) transport_->Close();
}

void SecureChannel::Fail(ErrorCode code, const std::string& message) {
  Close();
  throw Error(code, message);
}

void SecureChannel::Send(ByteView payload) {
  if (closed_) throw Error(ErrorCode::kChannelClosed, "channel is closed");
  ByteWriter header;
  header.U64(send_counter_);
  Bytes ct = crypto::AeadSeal(send_key_, CounterNonce(send_counter_),
                              header.bytes(), payload);
  ++send_counter_;
  ByteWriter frame;
  frame.U32(static_cast<std::uint32_t>(8 + ct.size()));
  frame.Raw(header.bytes());
  frame.Raw(ct);
  transport_->Send(frame.bytes());
}

Bytes SecureChannel::Receive(net::Millis timeout) {
  if (closed_) throw Error(ErrorCode::kChannelClosed, "channel is closed");
  Bytes frame;
  try {
    frame = transport_->Receive(timeout);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kTimeout) throw;
    Fail(e.code(), e.what());
  }
  if (frame.size() < 4 + 8 + crypto::kAeadTagSize) {
    Fail(ErrorCode::kDecode, "channel frame too short");
  }
  ByteReader r(frame);
  if (r.U32() != frame.size() - 4) {
    Fail(ErrorCode::kDecode, "channel frame length mismatch");
  }
  auto header = r.Raw(8);
  std::uint64_t counter = ByteReader(header).U64();
  if (counter != receive_counter_) {
    Fail(ErrorCode::kChannelReplay,
         "frame counter " + std::to_string(counter) + ", expected " +
             std::to_string(receive_counter_));
  }
  auto plain = crypto::AeadOpen(receive_key_, CounterNonce(counter), header,
                                r.Rest());
  if (!plain) Fail(ErrorCode::kChannelIntegrity, "frame failed authentication");
  ++receive_counter_;
  return std::move(*plain);
}

SecureChannel AttestedHandshake(std::unique_ptr<net::Transport> transport,
                                const HandshakeOptions& options) {
  crypto::Init();
  if (options.role.empty() || options.role.size() > kMaxRoleLength) {
    throw Error(ErrorCode::kInvalidInput, "handshake role must be 1-64 bytes");
  }
  if (options.peer_policy) options.peer_policy->Validate();
  net::Transport& t = *transport;
  try {
    PeerEvidence peer;
    crypto::FillRandom(peer.issued_nonce);

    Bytes my_hello(peer.issued_nonce.begin(), peer.issued_nonce.end());
    my_hello.insert(my_hello.end(), options.role.begin(), options.role.end());
    SendHandshake(t, HandshakeMessage::kHello, my_hello);
    Bytes peer_hello =
        ReceiveHandshake(t, HandshakeMessage::kHello, options.timeout);
    if (peer_hello.size() <= tee::kQuoteNonceSize ||
        peer_hello.size() > tee::kQuoteNonceSize + kMaxRoleLength) {
      throw Error(ErrorCode::kHandshake, "malformed HELLO");
    }
    tee::QuoteNonce peer_nonce{};
    std::copy_n(peer_hello.begin(), tee::kQuoteNonceSize, peer_nonce.begin());
    peer.role.assign(peer_hello.begin() + tee::kQuoteNonceSize,
                     peer_hello.end());
    if (peer_nonce == peer.issued_nonce) {
      throw Error(ErrorCode::kHandshake, "peer echoed our nonce");
    }

    crypto::KeyAgreement kx;
    SendHandshake(t, HandshakeMessage::kKeyShare, kx.public_key());
    Bytes peer_share =
        ReceiveHandshake(t, HandshakeMessage::kKeyShare, options.timeout);
    if (peer_share.size() != crypto::kPublicKeySize) {
      throw Error(ErrorCode::kHandshake, "malformed KEYSHARE");
    }
    std::copy(peer_share.begin(), peer_share.end(),
              peer.ephemeral_public_key.begin());

    Bytes my_quote;
    if (options.attester) {
      ChannelBinding mine{kx.public_key(), options.role, peer_nonce};
      my_quote = options.attester(mine.ReportData(), peer_nonce);
    }
    SendHandshake(t, HandshakeMessage::kQuote, my_quote);
    peer.quote = ReceiveHandshake(t, HandshakeMessage::kQuote, options.timeout);

    if (options.peer_policy) {
      if (peer.quote.empty()) {
        throw RejectedError(
            Verdict::Reject(Check::kDecode, "peer presented no quote"));
      }
      tee::Quote quote;
      try {
        quote = tee::Quote::Parse(peer.quote);
      } catch (const Error& e) {
        throw RejectedError(Verdict::Reject(Check::kDecode, e.what()));
      }
      Verdict v = VerifyQuote(quote, *options.peer_policy, peer.issued_nonce,
                              peer.Binding());
      if (!v.accepted()) throw RejectedError(std::move(v));
      peer.verified_identity = quote.identity;
    }

    auto shared = kx.SharedSecret(peer.ephemeral_public_key);

    // Transcript ordered by nonce so both sides agree without knowing who
    // connected first.
    bool low = std::lexicographical_compare(
        peer.issued_nonce.begin(), peer.issued_nonce.end(), peer_nonce.begin(),
        peer_nonce.end());
    Bytes transcript_input(kTranscriptLabel.begin(), kTranscriptLabel.end());
    auto add_pair = [&](ByteView mine, ByteView theirs) {
      AppendField(transcript_input, low ? mine : theirs);
      AppendField(transcript_input, low ? theirs : mine);
    };
    add_pair(my_hello, peer_hello);
    add_pair(kx.public_key(), peer.ephemeral_public_key);
    add_pair(my_quote, peer.quote);
    crypto::Digest transcript = crypto::Sha256(transcript_input);

    Bytes okm = crypto::Hkdf(shared, transcript, AsBytes(kChannelInfo), 96);
    crypto::AeadKey low_to_high{}, high_to_low{};
    std::copy_n(okm.begin(), 32, low_to_high.begin());
    std::copy_n(okm.begin() + 32, 32, high_to_low.begin());
    ByteView finish_key(okm.data() + 64, 32);

    auto finish_mac = [&](std::string_view role) {
      Bytes msg = ToBytes("finish");
      AppendField(msg, AsBytes(role));
      msg.insert(msg.end(), transcript.begin(), transcript.end());
      return crypto::HmacSha256(finish_key, msg);
    };
    SendHandshake(t, HandshakeMessage::kFinish, finish_mac(options.role));
    Bytes peer_finish =
        ReceiveHandshake(t, HandshakeMessage::kFinish, options.timeout);
    if (!crypto::ConstantTimeEqual(peer_finish, finish_mac(peer.role))) {
      throw Error(ErrorCode::kHandshake, "transcript MAC mismatch");
    }

    return SecureChannel(std::move(transport), low ? low_to_high : high_to_low,
                         low ? high_to_low : low_to_high, std::move(peer),
                         {kx.public_key(), options.role, peer_nonce});
  } catch (...) {
    t.Close();
    throw;
  }
}

}  // namespace efl::attest
