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

#ifndef EFL_MANAGER_SERVICE_HPP_
#define EFL_MANAGER_SERVICE_HPP_

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "efl/attestation.hpp"
#include "efl/counter_service.hpp"
#include "efl/policy_manager.hpp"
#include "efl/rpc.hpp"
#include "efl/transport.hpp"

namespace efl::pm {

// Label for the counter service signing key derived inside the manager
// enclave, so the key survives restarts of the same code on one platform.
inline constexpr std::string_view kCounterKeyLabel = "efl/counter-service/signing/v1";

// The policy manager and the monotonic counter service, hosted together in
// the manager enclave and served over attested channels.
class TrustedServices {
 public:
  struct Options {
    std::filesystem::path state_dir;
    counter::CounterService::Options counters;
    audit::Clock clock = audit::WallClockMillis;
    net::Millis handshake_timeout{10'000};
  };

  TrustedServices(tee::Enclave enclave, Options options);
  ~TrustedServices();

  TrustedServices(const TrustedServices&) = delete;
  TrustedServices& operator=(const TrustedServices&) = delete;

  PolicyManager& manager() { return manager_; }
  counter::CounterService& counters() { return *counters_; }

  // Handshake, then requests until the peer closes or Stop() is called.
  void ServeConnection(std::unique_ptr<net::Transport> transport);
  // Accepts on a background thread; one thread per connection.
  void Start(std::shared_ptr<net::Listener> listener);
  void Stop();

  rpc::Message Handle(const attest::PeerEvidence& peer, const rpc::Message& request);

 private:
  Options options_;
  PolicyManager manager_;
  std::unique_ptr<counter::CounterService> counters_;

  std::atomic<bool> stopping_{false};
  std::shared_ptr<net::Listener> listener_;
  std::thread acceptor_;
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
};

// Caller side of the manager protocol over one attested channel. Calls are
// serialized.
class ManagerClient {
 public:
  explicit ManagerClient(attest::SecureChannel channel);

  // Pins the manager's measurement through `manager_policy`; presents a
  // quote from `attester` when set.
  static std::unique_ptr<ManagerClient> Connect(
      std::unique_ptr<net::Transport> transport, std::string role,
      attest::QuoteSource attester, attest::AttestationPolicy manager_policy,
      net::Millis timeout = net::Millis(10'000));

  crypto::Digest UploadPolicy(std::string_view document);
  void GenerateSecrets(const crypto::Digest& policy_hash);
  // Quotes over this channel's binding, so the manager can tie the request
  // to the channel it arrived on.
  policy::InjectionBundle RequestSecrets(const crypto::Digest& policy_hash,
                                         std::string_view role,
                                         const std::optional<std::string>& client_id,
                                         const attest::QuoteSource& attester);
  policy::InjectionBundle RequestSecretsWithQuote(
      const crypto::Digest& policy_hash, std::string_view role,
      const std::optional<std::string>& client_id, ByteView quote);

  struct CounterReply {
    counter::CounterToken token;
    crypto::PublicKey service_key{};
  };
  CounterReply CounterCall(rpc::Type type, const std::optional<counter::CounterId>& id);
  crypto::PublicKey CounterServiceKey();

  attest::SecureChannel& channel() { return channel_; }

 private:
  Json Call(rpc::Type type, const Json& body);

  std::mutex mu_;
  attest::SecureChannel channel_;
};

// CounterClient backed by the manager's counter service. The service key is
// learned over the attested channel on first use and pinned after.
class RemoteCounter : public counter::CounterClient {
 public:
  explicit RemoteCounter(ManagerClient& client) : client_(client) {}

  counter::CounterToken Create() override;
  counter::CounterToken IncrementAsync(const counter::CounterId& id) override;
  counter::CounterToken ReadStable(const counter::CounterId& id) override;
  crypto::PublicKey service_key() override;

 private:
  counter::CounterToken Checked(const ManagerClient::CounterReply& reply);

  ManagerClient& client_;
  std::mutex mu_;
  std::optional<crypto::PublicKey> key_;
};

}  // namespace efl::pm

#endif  // EFL_MANAGER_SERVICE_HPP_
