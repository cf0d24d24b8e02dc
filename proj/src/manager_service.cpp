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

#include "efl/manager_service.hpp"

#include "efl/error.hpp"

namespace efl::pm {
namespace {

constexpr net::Millis kPoll{200};

Json TokenBody(const counter::CounterToken& token, const crypto::PublicKey& key) {
  return {{"token", Base64Encode(token.Serialize())},
          {"service_key", HexEncode(key)}};
}

}  // namespace

TrustedServices::TrustedServices(tee::Enclave enclave, Options options)
    : options_(std::move(options)),
      manager_(enclave, options_.state_dir, options_.clock) {
  auto seed = enclave.DeriveKey(kCounterKeyLabel);
  counters_ = std::make_unique<counter::CounterService>(
      crypto::SigningKey(seed), options_.state_dir / "counters.wal",
      options_.counters);
}

TrustedServices::~TrustedServices() { Stop(); }

rpc::Message TrustedServices::Handle(const attest::PeerEvidence& peer,
                                     const rpc::Message& request) {
  const Json& body = request.body;
  auto counter_id = [&] {
    return HexDecodeFixed<counter::kCounterIdSize>(RequireString(body, "counter_id"));
  };
  auto policy_hash = [&] {
    return HexDecodeFixed<crypto::kDigestSize>(RequireString(body, "policy_hash"));
  };
  try {
    switch (request.type) {
      case rpc::Type::kUploadPolicy: {
        auto hash = manager_.UploadPolicy(RequireString(body, "document"));
        return {rpc::Type::kOk, {{"policy_hash", HexEncode(hash)}}};
      }
      case rpc::Type::kGenerateSecrets:
        manager_.GenerateSecrets(policy_hash());
        return {rpc::Type::kOk, Json::object()};
      case rpc::Type::kRequestSecrets: {
        std::optional<std::string> client_id;
        if (body.contains("client_id")) client_id = RequireString(body, "client_id");
        auto bundle = manager_.RequestSecrets(peer, policy_hash(),
                                              RequireString(body, "role"), client_id,
                                              RequireBase64(body, "quote"));
        return {rpc::Type::kOk, {{"bundle", bundle.ToJson()}}};
      }
      case rpc::Type::kCounterCreate:
        return {rpc::Type::kOk,
                TokenBody(counters_->Create(), counters_->service_key())};
      case rpc::Type::kCounterIncrement:
        return {rpc::Type::kOk, TokenBody(counters_->IncrementAsync(counter_id()),
                                          counters_->service_key())};
      case rpc::Type::kCounterRead:
        if (!body.contains("counter_id")) {
          return {rpc::Type::kOk,
                  {{"service_key", HexEncode(counters_->service_key())}}};
        }
        return {rpc::Type::kOk, TokenBody(counters_->ReadStable(counter_id()),
                                          counters_->service_key())};
      default:
        throw Error(ErrorCode::kDecode, "unsupported request type");
    }
  } catch (const AccessDenied& e) {
    return {rpc::Type::kFailed,
            rpc::FailureBody(e, {{"check", attest::CheckName(e.verdict().failed)}})};
  } catch (const Error& e) {
    return {rpc::Type::kFailed, rpc::FailureBody(e)};
  } catch (const std::exception& e) {
    return {rpc::Type::kFailed,
            rpc::FailureBody(Error(ErrorCode::kInvalidInput, e.what()))};
  }
}

void TrustedServices::ServeConnection(std::unique_ptr<net::Transport> transport) {
  attest::HandshakeOptions hs;
  hs.role = std::string(attest::kRolePolicyManager);
  hs.attester = attest::QuoteFrom(manager_.enclave());
  hs.timeout = options_.handshake_timeout;
  std::optional<attest::SecureChannel> channel;
  try {
    channel.emplace(attest::AttestedHandshake(std::move(transport), hs));
  } catch (const Error&) {
    return;
  }
  while (!stopping_) {
    Bytes frame;
    try {
      frame = channel->Receive(kPoll);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kTimeout) continue;
      return;
    }
    rpc::Message reply;
    try {
      reply = Handle(channel->peer(), rpc::Decode(frame));
    } catch (const Error& e) {
      reply = {rpc::Type::kFailed, rpc::FailureBody(e)};
    }
    try {
      channel->Send(rpc::Encode(reply.type, reply.body));
    } catch (const Error&) {
      return;
    }
  }
}

void TrustedServices::Start(std::shared_ptr<net::Listener> listener) {
  listener_ = std::move(listener);
  acceptor_ = std::thread([this] {
    while (!stopping_) {
      auto t = listener_->Accept(kPoll);
      if (!t) continue;
      std::lock_guard lock(workers_mu_);
      workers_.emplace_back([this, t = std::move(t)]() mutable {
        ServeConnection(std::move(t));
      });
    }
  });
}

void TrustedServices::Stop() {
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mu_);
    workers.swap(workers_);
  }
  for (auto& w : workers) w.join();
  if (listener_) listener_->Close();
}

ManagerClient::ManagerClient(attest::SecureChannel channel)
    : channel_(std::move(channel)) {}

std::unique_ptr<ManagerClient> ManagerClient::Connect(
    std::unique_ptr<net::Transport> transport, std::string role,
    attest::QuoteSource attester, attest::AttestationPolicy manager_policy,
    net::Millis timeout) {
  attest::HandshakeOptions hs;
  hs.role = std::move(role);
  hs.attester = std::move(attester);
  hs.peer_policy = std::move(manager_policy);
  hs.timeout = timeout;
  return std::make_unique<ManagerClient>(
      attest::AttestedHandshake(std::move(transport), hs));
}

Json ManagerClient::Call(rpc::Type type, const Json& body) {
  std::lock_guard lock(mu_);
  return rpc::Call(channel_, type, body);
}

crypto::Digest ManagerClient::UploadPolicy(std::string_view document) {
  Json reply = Call(rpc::Type::kUploadPolicy, {{"document", document}});
  return HexDecodeFixed<crypto::kDigestSize>(RequireString(reply, "policy_hash"));
}

void ManagerClient::GenerateSecrets(const crypto::Digest& policy_hash) {
  Call(rpc::Type::kGenerateSecrets, {{"policy_hash", HexEncode(policy_hash)}});
}

policy::InjectionBundle ManagerClient::RequestSecrets(
    const crypto::Digest& policy_hash, std::string_view role,
    const std::optional<std::string>& client_id, const attest::QuoteSource& attester) {
  const attest::ChannelBinding& mine = channel_.local_binding();
  Bytes quote = attester(mine.ReportData(), mine.session_nonce);
  return RequestSecretsWithQuote(policy_hash, role, client_id, quote);
}

policy::InjectionBundle ManagerClient::RequestSecretsWithQuote(
    const crypto::Digest& policy_hash, std::string_view role,
    const std::optional<std::string>& client_id, ByteView quote) {
  Json body = {{"policy_hash", HexEncode(policy_hash)},
               {"role", role},
               {"quote", Base64Encode(quote)}};
  if (client_id) body["client_id"] = *client_id;
  Json reply = Call(rpc::Type::kRequestSecrets, body);
  return policy::InjectionBundle::FromJson(RequireField(reply, "bundle"));
}

ManagerClient::CounterReply ManagerClient::CounterCall(
    rpc::Type type, const std::optional<counter::CounterId>& id) {
  Json body = Json::object();
  if (id) body["counter_id"] = HexEncode(*id);
  Json reply = Call(type, body);
  return {counter::CounterToken::Parse(RequireBase64(reply, "token")),
          HexDecodeFixed<crypto::kPublicKeySize>(RequireString(reply, "service_key"))};
}

crypto::PublicKey ManagerClient::CounterServiceKey() {
  Json reply = Call(rpc::Type::kCounterRead, Json::object());
  return HexDecodeFixed<crypto::kPublicKeySize>(RequireString(reply, "service_key"));
}

counter::CounterToken RemoteCounter::Checked(const ManagerClient::CounterReply& reply) {
  std::lock_guard lock(mu_);
  if (!key_) key_ = reply.service_key;
  if (reply.service_key != *key_ || !reply.token.Verify(*key_)) {
    throw Error(ErrorCode::kFreshnessToken, "counter reply not signed by the pinned key");
  }
  return reply.token;
}

counter::CounterToken RemoteCounter::Create() {
  return Checked(client_.CounterCall(rpc::Type::kCounterCreate, std::nullopt));
}

counter::CounterToken RemoteCounter::IncrementAsync(const counter::CounterId& id) {
  return Checked(client_.CounterCall(rpc::Type::kCounterIncrement, id));
}

counter::CounterToken RemoteCounter::ReadStable(const counter::CounterId& id) {
  return Checked(client_.CounterCall(rpc::Type::kCounterRead, id));
}

crypto::PublicKey RemoteCounter::service_key() {
  std::lock_guard lock(mu_);
  if (!key_) key_ = client_.CounterServiceKey();
  return *key_;
}

}  // namespace efl::pm
