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

#include "efl/demo.hpp"

#include <exception>
#include <mutex>
#include <thread>

#include "efl/error.hpp"
#include "efl/file_io.hpp"
#include "efl/file_shield.hpp"
#include "efl/manager_service.hpp"

namespace efl::demo {
namespace fs = std::filesystem;

Bytes CodeBundle(std::string_view role) {
  return ToBytes("enclavefl/" + std::string(role) + "/0.1.0");
}

Bytes ConfigBundle(std::string_view role) {
  return ToBytes(CanonicalEncode({{"role", role}}));
}

tee::Measurement RoleMeasurement(std::string_view role) {
  return tee::Measure(CodeBundle(role), ConfigBundle(role));
}

tee::PlatformKeys DerivedPlatformKeys(std::uint64_t seed, std::string_view name) {
  auto part = [&](std::string_view label) {
    crypto::Sha256Hasher h;
    h.Update("efl/demo-platform/").Update(label).Update("/").Update(name).Update(
        "/" + std::to_string(seed));
    return h.Finish();
  };
  tee::PlatformKeys k;
  auto id = part("id");
  std::copy_n(id.begin(), k.platform_id.size(), k.platform_id.begin());
  k.root_seed = part("root");
  k.platform_secret = part("secret");
  return k;
}

namespace {

struct Party {
  tee::Platform platform;
  tee::Enclave enclave;
};

Party MakeParty(const Options& o, std::string_view name, std::string_view role) {
  tee::Platform platform(o.deterministic_keys ? DerivedPlatformKeys(o.data_seed, name)
                                              : tee::PlatformKeys::Generate());
  tee::Enclave enclave = platform.Spawn(CodeBundle(role), ConfigBundle(role));
  return {std::move(platform), std::move(enclave)};
}

}  // namespace

Report Run(const Options& o) {
  if (o.clients < 1) throw Error(ErrorCode::kInvalidInput, "need at least one client");
  const fs::path manager_dir = o.work_dir / "manager";
  const fs::path coordinator_dir = o.work_dir / "coordinator";
  const fs::path data_dir = o.work_dir / "data";
  if (!o.resume) {
    for (const auto& d : {manager_dir, coordinator_dir, data_dir}) fs::remove_all(d);
  }
  fs::create_directories(data_dir);

  Report report;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < o.clients; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "client-%02zu", i + 1);
    ids.emplace_back(buf);
  }
  report.client_ids = ids;

  // Data owners' plaintext lives only in this process's memory.
  std::vector<fl::Dataset> datasets;
  for (std::size_t i = 0; i < o.clients; ++i) {
    datasets.push_back(fl::SyntheticGaussian(
        o.rows_per_client, o.features, o.separation,
        fl::DeriveSeed(o.data_seed, "client-data", i)));
    report.sensitive.dataset_csv.push_back(datasets.back().ToCsv());
  }
  fl::Dataset validation = fl::SyntheticGaussian(
      o.validation_rows, o.features, o.separation,
      fl::DeriveSeed(o.data_seed, "validation-data", 0));
  fl::Dataset test = fl::SyntheticGaussian(o.test_rows, o.features, o.separation,
                                           fl::DeriveSeed(o.data_seed, "test-data", 0));
  std::string validation_csv = validation.ToCsv();
  report.sensitive.dataset_csv.push_back(validation_csv);

  Party manager = MakeParty(o, "manager", attest::kRolePolicyManager);
  Party coordinator = MakeParty(o, "coordinator", attest::kRoleCoordinator);
  std::vector<Party> clients;
  for (const auto& id : ids) clients.push_back(MakeParty(o, id, attest::kRoleClient));

  auto tap = [&](std::unique_ptr<net::Transport> t, std::string link) {
    return o.capture ? net::Tap(std::move(t), o.capture, std::move(link)) : std::move(t);
  };

  pm::TrustedServices::Options service_options;
  service_options.state_dir = manager_dir;
  pm::TrustedServices services(manager.enclave, service_options);

  std::shared_ptr<net::Listener> manager_listener;
  std::shared_ptr<net::Listener> coordinator_listener;
  std::function<std::unique_ptr<net::Transport>()> dial_manager, dial_coordinator;
  if (o.use_tcp) {
    auto ml = std::make_shared<net::TcpListener>("127.0.0.1", 0);
    auto cl = std::make_shared<net::TcpListener>("127.0.0.1", 0);
    dial_manager = [port = ml->port()] {
      return net::TcpConnect("127.0.0.1", port, net::Millis(5'000));
    };
    dial_coordinator = [port = cl->port()] {
      return net::TcpConnect("127.0.0.1", port, net::Millis(5'000));
    };
    manager_listener = ml;
    coordinator_listener = cl;
  } else {
    auto ml = std::make_shared<net::InProcListener>();
    auto cl = std::make_shared<net::InProcListener>();
    dial_manager = [ml] { return ml->Connect(); };
    dial_coordinator = [cl] { return cl->Connect(); };
    manager_listener = ml;
    coordinator_listener = cl;
  }
  services.Start(manager_listener);

  attest::AttestationPolicy manager_policy{
      {manager.platform.root_public_key()}, {manager.enclave.measurement()}, 0};

  // Operator: encrypt datasets under fresh counters, write and upload the
  // policy.
  auto op = pm::ManagerClient::Connect(tap(dial_manager(), "operator-manager"),
                                       std::string(attest::kRoleOperator), {},
                                       manager_policy);
  pm::RemoteCounter op_counters(*op);
  auto data_key = [&](std::string_view name) {
    if (!o.deterministic_keys) return crypto::RandomArray<crypto::kAeadKeySize>();
    crypto::Sha256Hasher h;
    h.Update("efl/demo-data-key/").Update(name).Update("/" + std::to_string(o.data_seed));
    return h.Finish();
  };
  auto shield_file = [&](const std::string& csv, const std::string& secret,
                         const fs::path& path) {
    auto key = data_key(secret);
    auto token = op_counters.Create();
    auto sf = shield::ShieldEncrypt(AsBytes(csv), key, shield::KeyIdFor(secret),
                                    token, op_counters.service_key());
    WriteFileAtomic(path, sf.Serialize());
    return HexEncode(key);
  };

  Json secrets = Json::array();
  Json roster = Json::array();
  Json injection = Json::array();
  for (std::size_t i = 0; i < o.clients; ++i) {
    std::string secret = "DATA_KEY_" + std::to_string(i + 1);
    std::string key_hex = shield_file(report.sensitive.dataset_csv[i], secret,
                                      data_dir / (ids[i] + ".sfl"));
    secrets.push_back({{"name", secret}, {"kind", "provided-value"}, {"value", key_hex}});
    roster.push_back(
        {{"client_id", ids[i]},
         {"dataset_hash", HexEncode(crypto::Sha256(AsBytes(report.sensitive.dataset_csv[i])))}});
    injection.push_back({{"role", "client"},
                         {"client_id", ids[i]},
                         {"mechanism", "environment-variable"},
                         {"variable", orch::kEnvDatasetKey},
                         {"value", "$$" + secret + "$$"}});
  }
  std::string validation_key =
      shield_file(validation_csv, "VALIDATION_KEY", data_dir / "validation.sfl");
  secrets.push_back(
      {{"name", "VALIDATION_KEY"}, {"kind", "provided-value"}, {"value", validation_key}});
  secrets.push_back({{"name", "CHECKPOINT_KEY"}, {"kind", "symmetric-key-256"}});
  secrets.push_back({{"name", "SESSION_TOKEN"}, {"kind", "random-hex-16"}});
  injection.push_back({{"role", "coordinator"},
                       {"mechanism", "environment-variable"},
                       {"variable", orch::kEnvCheckpointKey},
                       {"value", "$$CHECKPOINT_KEY$$"}});
  injection.push_back({{"role", "coordinator"},
                       {"mechanism", "environment-variable"},
                       {"variable", orch::kEnvValidationKey},
                       {"value", "$$VALIDATION_KEY$$"}});
  for (const char* role : {"coordinator", "client"}) {
    injection.push_back({{"role", role},
                         {"mechanism", "environment-variable"},
                         {"variable", "EFL_SESSION_TOKEN"},
                         {"value", "$$SESSION_TOKEN$$"}});
    injection.push_back({{"role", role},
                         {"mechanism", "argument"},
                         {"value", "--session-token=$$SESSION_TOKEN$$"}});
  }
  injection.push_back({{"role", "coordinator"},
                       {"mechanism", "file-template"},
                       {"path", "conf/session.conf"},
                       {"template", "token = $$SESSION_TOKEN$$\n"}});

  Json policy_doc = {
      {"name", "demo-" + std::to_string(o.data_seed)},
      {"measurements",
       {{"coordinator", coordinator.enclave.measurement().Hex()},
        {"client", clients.front().enclave.measurement().Hex()},
        {"policy_manager_self", manager.enclave.measurement().Hex()}}},
      {"platform_roots", Json::array()},
      {"roster", roster},
      {"validation_dataset_hash", HexEncode(crypto::Sha256(AsBytes(validation_csv)))},
      {"session", o.session.ToJson()},
      {"secrets", secrets},
      {"injection", injection}};
  policy_doc["platform_roots"].push_back(HexEncode(coordinator.platform.root_public_key()));
  for (const auto& c : clients) {
    policy_doc["platform_roots"].push_back(HexEncode(c.platform.root_public_key()));
  }
  crypto::Digest policy_hash = op->UploadPolicy(policy_doc.dump(2));
  report.policy_hash = HexEncode(policy_hash);
  try {
    op->GenerateSecrets(policy_hash);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kAlreadyGenerated || !o.resume) throw;
  }

  // Secret values reach only the enclaves; the observer copies them here for
  // the scans.
  std::mutex sensitive_mu;
  auto observe_bundle = [&](const policy::InjectionBundle& b) {
    std::lock_guard lock(sensitive_mu);
    for (const auto& [var, value] : b.environment) {
      if (b.environment_secrets.contains(var)) {
        report.sensitive.secret_values.push_back(value);
      }
    }
  };

  std::exception_ptr coordinator_error;
  std::thread coordinator_thread([&] {
    try {
      auto mc = pm::ManagerClient::Connect(tap(dial_manager(), "coordinator-manager"),
                                           std::string(attest::kRoleCoordinator),
                                           attest::QuoteFrom(coordinator.enclave),
                                           manager_policy);
      orch::CoordinatorOptions co;
      co.state_dir = coordinator_dir;
      co.validation_file = data_dir / "validation.sfl";
      co.policy_hash = policy_hash;
      co.halt_after_round = o.halt_after_round;
      co.on_bundle = observe_bundle;
      report.session = orch::Coordinator(coordinator.enclave, co)
                           .Run(*mc, *coordinator_listener);
    } catch (...) {
      coordinator_error = std::current_exception();
      coordinator_listener->Close();
    }
  });

  report.clients.resize(o.clients);
  std::vector<std::exception_ptr> client_errors(o.clients);
  std::vector<std::thread> client_threads;
  for (std::size_t i = 0; i < o.clients; ++i) {
    client_threads.emplace_back([&, i] {
      try {
        auto mc = pm::ManagerClient::Connect(
            tap(dial_manager(), ids[i] + "-manager"), std::string(attest::kRoleClient),
            attest::QuoteFrom(clients[i].enclave), manager_policy);
        orch::ClientOptions co;
        co.client_id = ids[i];
        co.dataset_file = data_dir / (ids[i] + ".sfl");
        co.policy_hash = policy_hash;
        co.on_bundle = observe_bundle;
        auto tamper = o.tamper.find(i);
        co.tamper_update = [&, tamper](fl::ModelUpdate u) {
          if (tamper != o.tamper.end()) u = tamper->second(std::move(u));
          std::lock_guard lock(sensitive_mu);
          report.sensitive.update_vectors.push_back(u.params.Serialize());
          return u;
        };
        report.clients[i] = orch::ClientAgent(attest::QuoteFrom(clients[i].enclave), co)
                                .Run(*mc, tap(dial_coordinator(), ids[i] + "-coordinator"));
      } catch (...) {
        client_errors[i] = std::current_exception();
      }
    });
  }
  coordinator_thread.join();
  for (auto& t : client_threads) t.join();
  op.reset();
  services.Stop();
  if (coordinator_error) std::rethrow_exception(coordinator_error);
  for (auto& e : client_errors) {
    if (e) std::rethrow_exception(e);
  }

  report.coordinator_audit = audit::VerifyAuditFile(coordinator_dir / "audit.log");
  report.manager_audit = audit::VerifyAuditFile(manager_dir / "audit.log");
  report.test_accuracy = fl::Evaluate(report.session.model.params, test).accuracy;

  fl::Dataset pooled = datasets.front();
  for (std::size_t i = 1; i < datasets.size(); ++i) pooled = pooled.Concat(datasets[i]);
  SessionConfig central = o.session;
  central.local_epochs = static_cast<std::uint32_t>(
      o.session.local_epochs * std::max<std::uint64_t>(report.session.model.round, 1));
  auto centralized = fl::LocalTrain(fl::ParameterVector::Zeros(o.features + 1), pooled,
                                    central, fl::DeriveSeed(o.data_seed, "centralized", 0));
  report.centralized_test_accuracy = fl::Evaluate(centralized.params, test).accuracy;
  return report;
}

}  // namespace efl::demo
