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

// In-process deployment for end-to-end tests: a manager, a coordinator and a
// set of clients, each on its own simulated platform, with every party's
// behaviour overridable.

#ifndef EFL_TESTS_HARNESS_HPP_
#define EFL_TESTS_HARNESS_HPP_

#include <exception>
#include <mutex>
#include <thread>

#include "efl/demo.hpp"
#include "efl/file_io.hpp"
#include "efl/file_shield.hpp"
#include "efl/manager_service.hpp"
#include "efl/orchestrator.hpp"

namespace efl::testing {

namespace fs = std::filesystem;

struct Party {
  tee::Platform platform;
  tee::Enclave enclave;
  static Party Make(std::string_view role, tee::PlatformKeys keys = tee::PlatformKeys::Generate()) {
    tee::Platform p(keys);
    tee::Enclave e = p.Spawn(demo::CodeBundle(role), demo::ConfigBundle(role));
    return {std::move(p), std::move(e)};
  }
};

class Harness {
 public:
  struct Options {
    fs::path dir;
    std::size_t clients = 3;
    std::size_t rows = 120;
    std::size_t features = 6;
    std::size_t validation_rows = 200;
    double separation = 0.5;
    std::uint64_t seed = 1;
    SessionConfig session;
    std::shared_ptr<net::WireCapture> capture;
  };

  struct ClientSpec {
    std::string client_id;
    std::size_t index = 0;
    attest::QuoteSource attester;
    fs::path dataset_file;
    std::optional<policy::InjectionBundle> preset_bundle;
    std::function<fl::ModelUpdate(fl::ModelUpdate)> tamper;
    net::FrameFilter on_send;
  };

  struct Outcome {
    std::optional<orch::SessionResult> session;
    std::optional<ErrorCode> coordinator_error;
    std::string coordinator_what;
    std::vector<std::optional<orch::ClientResult>> clients;
    std::vector<std::optional<ErrorCode>> client_errors;
  };

  explicit Harness(Options o) : o_(std::move(o)) {
    fs::create_directories(data_dir());
    manager_ = Party::Make(attest::kRolePolicyManager);
    coordinator_ = Party::Make(attest::kRoleCoordinator);
    for (std::size_t i = 0; i < o_.clients; ++i) {
      ids_.push_back("client-" + std::to_string(i + 1));
      parties_.push_back(Party::Make(attest::kRoleClient));
      datasets_.push_back(fl::SyntheticGaussian(o_.rows, o_.features, o_.separation,
                                                fl::DeriveSeed(o_.seed, "client-data", i)));
    }
    validation_ = fl::SyntheticGaussian(o_.validation_rows, o_.features, o_.separation,
                                        fl::DeriveSeed(o_.seed, "validation-data", 0));
    pm::TrustedServices::Options so;
    so.state_dir = o_.dir / "manager";
    services_ = std::make_unique<pm::TrustedServices>(manager_->enclave, so);
    manager_listener_ = std::make_shared<net::InProcListener>();
    services_->Start(manager_listener_);
    manager_policy_ = {{manager_->platform.root_public_key()}, {manager_->enclave.measurement()}, 0};

    operator_ = ConnectManager(attest::kRoleOperator, {}, "operator-manager");
    op_counters_ = std::make_unique<pm::RemoteCounter>(*operator_);

    Json secrets = Json::array(), roster = Json::array(), injection = Json::array();
    for (std::size_t i = 0; i < o_.clients; ++i) {
      std::string secret = "DATA_KEY_" + std::to_string(i + 1);
      std::string csv = datasets_[i].ToCsv();
      ShieldFile(csv, secret, data_dir() / (ids_[i] + ".sfl"));
      secrets.push_back({{"name", secret}, {"kind", "provided-value"}, {"value", HexEncode(KeyFor(secret))}});
      roster.push_back({{"client_id", ids_[i]}, {"dataset_hash", HexEncode(crypto::Sha256(AsBytes(csv)))}});
      injection.push_back({{"role", "client"}, {"client_id", ids_[i]},
                           {"mechanism", "environment-variable"},
                           {"variable", orch::kEnvDatasetKey}, {"value", "$$" + secret + "$$"}});
    }
    std::string vcsv = validation_.ToCsv();
    ShieldFile(vcsv, "VALIDATION_KEY", data_dir() / "validation.sfl");
    secrets.push_back({{"name", "VALIDATION_KEY"}, {"kind", "provided-value"},
                       {"value", HexEncode(KeyFor("VALIDATION_KEY"))}});
    secrets.push_back({{"name", "CHECKPOINT_KEY"}, {"kind", "symmetric-key-256"}});
    injection.push_back({{"role", "coordinator"}, {"mechanism", "environment-variable"},
                         {"variable", orch::kEnvCheckpointKey}, {"value", "$$CHECKPOINT_KEY$$"}});
    injection.push_back({{"role", "coordinator"}, {"mechanism", "environment-variable"},
                         {"variable", orch::kEnvValidationKey}, {"value", "$$VALIDATION_KEY$$"}});
    Json roots = Json::array({HexEncode(coordinator_->platform.root_public_key())});
    for (const auto& p : parties_) roots.push_back(HexEncode(p.platform.root_public_key()));
    Json doc = {{"name", "harness"},
                {"measurements", {{"coordinator", coordinator_->enclave.measurement().Hex()},
                                  {"client", parties_.front().enclave.measurement().Hex()},
                                  {"policy_manager_self", manager_->enclave.measurement().Hex()}}},
                {"platform_roots", roots},
                {"roster", roster},
                {"validation_dataset_hash", HexEncode(crypto::Sha256(AsBytes(vcsv)))},
                {"session", o_.session.ToJson()},
                {"secrets", secrets},
                {"injection", injection}};
    policy_hash_ = operator_->UploadPolicy(doc.dump());
    operator_->GenerateSecrets(policy_hash_);
  }

  ~Harness() {
    op_counters_.reset();
    operator_.reset();
    services_->Stop();
  }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<fl::Dataset>& datasets() const { return datasets_; }
  const fl::Dataset& validation() const { return validation_; }
  const crypto::Digest& policy_hash() const { return policy_hash_; }
  const Party& client_party(std::size_t i) const { return parties_[i]; }
  const Party& coordinator_party() const { return *coordinator_; }
  pm::TrustedServices& services() { return *services_; }
  fs::path data_dir() const { return o_.dir / "data"; }
  fs::path coordinator_dir() const { return o_.dir / "coordinator"; }

  crypto::AeadKey KeyFor(const std::string& secret) {
    auto [it, fresh] = keys_.try_emplace(secret);
    if (fresh) it->second = crypto::RandomArray<32>();
    return it->second;
  }

  // Encrypts as the data owner would, under a fresh counter.
  void ShieldFile(const std::string& plaintext, const std::string& secret, const fs::path& path) {
    auto token = op_counters_->Create();
    auto sf = shield::ShieldEncrypt(AsBytes(plaintext), KeyFor(secret), shield::KeyIdFor(secret), token,
                                    op_counters_->service_key());
    WriteFileAtomic(path, sf.Serialize());
  }

  std::unique_ptr<net::Transport> Tap(std::unique_ptr<net::Transport> t, const std::string& link) {
    return o_.capture ? net::Tap(std::move(t), o_.capture, link) : std::move(t);
  }

  std::unique_ptr<pm::ManagerClient> ConnectManager(std::string_view role, attest::QuoteSource attester,
                                                    const std::string& link) {
    return pm::ManagerClient::Connect(Tap(manager_listener_->Connect(), link), std::string(role),
                                      std::move(attester), manager_policy_);
  }

  // Bundle for roster member `i`, fetched by its genuine enclave.
  policy::InjectionBundle GenuineBundle(std::size_t i) {
    auto mc = ConnectManager(attest::kRoleClient, attest::QuoteFrom(parties_[i].enclave), "bundle");
    return mc->RequestSecrets(policy_hash_, policy::kMeasurementClient, ids_[i],
                              attest::QuoteFrom(parties_[i].enclave));
  }

  ClientSpec Honest(std::size_t i) const {
    ClientSpec c;
    c.client_id = ids_[i];
    c.index = i;
    c.attester = attest::QuoteFrom(parties_[i].enclave);
    c.dataset_file = data_dir() / (ids_[i] + ".sfl");
    return c;
  }
  std::vector<ClientSpec> AllHonest() const {
    std::vector<ClientSpec> out;
    for (std::size_t i = 0; i < ids_.size(); ++i) out.push_back(Honest(i));
    return out;
  }

  orch::CoordinatorOptions CoordinatorDefaults() const {
    orch::CoordinatorOptions co;
    co.state_dir = coordinator_dir();
    co.validation_file = data_dir() / "validation.sfl";
    co.policy_hash = policy_hash_;
    co.join_window = net::Millis(1'500);
    co.handshake_timeout = net::Millis(2'000);
    return co;
  }

  Outcome Run(const std::vector<ClientSpec>& specs, orch::CoordinatorOptions co) {
    Outcome out;
    auto listener = std::make_shared<net::InProcListener>();
    std::thread coordinator([&] {
      try {
        auto mc = ConnectManager(attest::kRoleCoordinator, attest::QuoteFrom(coordinator_->enclave),
                                 "coordinator-manager");
        out.session = orch::Coordinator(coordinator_->enclave, co).Run(*mc, *listener);
      } catch (const Error& e) {
        out.coordinator_error = e.code();
        out.coordinator_what = e.what();
      }
      listener->Close();
    });
    out.clients.resize(specs.size());
    out.client_errors.resize(specs.size());
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < specs.size(); ++k) {
      threads.emplace_back([&, k] {
        const ClientSpec& spec = specs[k];
        try {
          auto mc = ConnectManager(attest::kRoleClient, spec.attester, spec.client_id + "-manager");
          orch::ClientOptions opts;
          opts.client_id = spec.client_id;
          opts.dataset_file = spec.dataset_file;
          opts.policy_hash = policy_hash_;
          opts.handshake_timeout = net::Millis(2'000);
          opts.idle_timeout = net::Millis(20'000);
          opts.preset_bundle = spec.preset_bundle;
          opts.tamper_update = spec.tamper;
          auto link = Tap(listener->Connect(), spec.client_id + "-coordinator");
          if (spec.on_send) link = net::Intercept(std::move(link), spec.on_send);
          out.clients[k] = orch::ClientAgent(spec.attester, opts).Run(*mc, std::move(link));
        } catch (const Error& e) {
          out.client_errors[k] = e.code();
        }
      });
    }
    coordinator.join();
    for (auto& t : threads) t.join();
    return out;
  }

  Outcome Run(const std::vector<ClientSpec>& specs) { return Run(specs, CoordinatorDefaults()); }

 private:
  Options o_;
  std::optional<Party> manager_, coordinator_;
  std::vector<Party> parties_;
  std::vector<std::string> ids_;
  std::vector<fl::Dataset> datasets_;
  fl::Dataset validation_;
  std::map<std::string, crypto::AeadKey> keys_;
  std::unique_ptr<pm::TrustedServices> services_;
  std::shared_ptr<net::InProcListener> manager_listener_;
  attest::AttestationPolicy manager_policy_;
  std::unique_ptr<pm::ManagerClient> operator_;
  std::unique_ptr<pm::RemoteCounter> op_counters_;
  crypto::Digest policy_hash_{};
};

inline std::vector<std::string> AuditKinds(const fs::path& path) {
  std::vector<std::string> kinds;
  for (const auto& e : audit::ReadAudit(path)) kinds.push_back(e.kind);
  return kinds;
}

}  // namespace efl::testing

#endif  // EFL_TESTS_HARNESS_HPP_
