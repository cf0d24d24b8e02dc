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

// efl: operator command-line tool.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "efl/audit.hpp"
#include "efl/demo.hpp"
#include "efl/error.hpp"
#include "efl/file_io.hpp"
#include "efl/file_shield.hpp"
#include "efl/manager_service.hpp"
#include "efl/orchestrator.hpp"
#include "efl/policy.hpp"

namespace fs = std::filesystem;
using namespace efl;

namespace {

std::atomic<bool> g_stop{false};

void OnSignal(int) { g_stop = true; }

tee::Enclave SpawnRole(const fs::path& platform_file, std::string_view role) {
  tee::Platform platform(tee::PlatformKeys::Load(platform_file));
  return platform.Spawn(demo::CodeBundle(role), demo::ConfigBundle(role));
}

// Session file: where the services are and what to trust.
struct SessionFile {
  std::string policy_hash;
  std::string manager;
  std::string manager_root;
  std::string manager_measurement;
  std::string coordinator;
  fs::path state_dir;
  fs::path validation_file;
  std::uint64_t join_window_ms = 30'000;

  static SessionFile Load(const fs::path& path) {
    Json j = ParseJson(ToString(ReadFileBytes(path)));
    SessionFile s;
    s.policy_hash = j.value("policy_hash", "");
    s.manager = RequireString(j, "manager");
    s.manager_root = RequireString(j, "manager_root");
    s.manager_measurement =
        j.value("manager_measurement", demo::RoleMeasurement(attest::kRolePolicyManager).Hex());
    s.coordinator = j.value("coordinator", "");
    s.state_dir = j.value("state_dir", "");
    s.validation_file = j.value("validation_file", "");
    s.join_window_ms = j.value("join_window_ms", s.join_window_ms);
    return s;
  }

  crypto::Digest PolicyHash() const {
    return HexDecodeFixed<crypto::kDigestSize>(policy_hash);
  }

  std::unique_ptr<pm::ManagerClient> ConnectManager(std::string role,
                                                    attest::QuoteSource attester) const {
    auto [host, port] = net::ParseEndpoint(manager);
    attest::AttestationPolicy p{
        {HexDecodeFixed<crypto::kPublicKeySize>(manager_root)},
        {tee::Measurement::FromHex(manager_measurement)},
        0};
    return pm::ManagerClient::Connect(net::TcpConnect(host, port, net::Millis(10'000)),
                                      std::move(role), std::move(attester), p);
  }
};

void PrintAuditVerdict(const audit::AuditVerdict& v) {
  if (v.ok) {
    std::cout << "audit ok: " << v.entries << " entries\n";
  } else {
    std::cout << "audit broken at entry " << v.first_bad << ": "
              << audit::BreakName(v.reason) << " (" << v.detail << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"enclavefl: federated learning with simulated enclaves"};
  app.require_subcommand(1);

  // keygen
  fs::path keygen_out;
  auto* keygen = app.add_subcommand("keygen", "Create a simulated platform key file");
  keygen->add_option("--out", keygen_out, "Key file to write")->required();

  // measure
  std::string measure_role;
  fs::path measure_code, measure_config;
  auto* measure = app.add_subcommand("measure", "Print an enclave measurement");
  auto* role_opt = measure->add_option("--role", measure_role,
                                       "Built-in role: policy-manager, coordinator, client");
  measure->add_option("bundle", measure_code, "Code bundle file")->excludes(role_opt);
  measure->add_option("--config", measure_config, "Config file measured with the bundle");

  // policy
  auto* policy_cmd = app.add_subcommand("policy", "Policy documents");
  policy_cmd->require_subcommand(1);
  fs::path policy_out;
  std::string policy_name = "session";
  std::vector<std::string> policy_roots, policy_clients;
  auto* policy_new = policy_cmd->add_subcommand("new", "Write a policy skeleton");
  policy_new->add_option("--out", policy_out)->required();
  policy_new->add_option("--name", policy_name);
  policy_new->add_option("--root", policy_roots, "Trusted platform root (hex)");
  policy_new->add_option("--client", policy_clients, "ID:DATASET_HASH roster entry");
  fs::path policy_file;
  auto* policy_hash_cmd = policy_cmd->add_subcommand("hash", "Print a policy's hash");
  policy_hash_cmd->add_option("file", policy_file)->required()->check(CLI::ExistingFile);
  fs::path session_path;
  auto* policy_upload = policy_cmd->add_subcommand("upload", "Upload and generate secrets");
  policy_upload->add_option("file", policy_file)->required()->check(CLI::ExistingFile);
  policy_upload->add_option("--session", session_path)->required();

  // encrypt-data, decrypt-data
  fs::path data_in, data_out;
  std::string secret_name, key_hex;
  auto* encrypt = app.add_subcommand("encrypt-data",
                                     "Shield a dataset under a fresh counter");
  encrypt->add_option("--in", data_in)->required()->check(CLI::ExistingFile);
  encrypt->add_option("--out", data_out)->required();
  encrypt->add_option("--secret", secret_name, "Policy secret that will hold the key")
      ->required();
  encrypt->add_option("--key", key_hex, "256-bit key (hex); generated when absent");
  encrypt->add_option("--session", session_path)->required();

  fs::path decrypt_in, decrypt_out;
  auto* decrypt = app.add_subcommand("decrypt-data",
                                     "Open a shielded file as its data owner");
  decrypt->add_option("--in", decrypt_in)->required()->check(CLI::ExistingFile);
  decrypt->add_option("--out", decrypt_out)->required();
  decrypt->add_option("--secret", secret_name, "Policy secret holding the key")->required();
  decrypt->add_option("--key", key_hex, "256-bit key (hex)")->required();
  decrypt->add_option("--session", session_path)->required();

  // counter init
  auto* counter_cmd = app.add_subcommand("counter", "Monotonic counters");
  counter_cmd->require_subcommand(1);
  auto* counter_init = counter_cmd->add_subcommand("init", "Create a counter");
  counter_init->add_option("--session", session_path)->required();

  // services
  fs::path platform_file, state_dir;
  std::string listen = "127.0.0.1:7400";
  auto* run_manager = app.add_subcommand("run-manager", "Serve the policy manager");
  run_manager->add_option("--platform", platform_file)->required()->check(CLI::ExistingFile);
  run_manager->add_option("--state", state_dir)->required();
  run_manager->add_option("--listen", listen);

  auto* run_coordinator = app.add_subcommand("run-coordinator", "Run a training session");
  run_coordinator->add_option("--platform", platform_file)->required()->check(CLI::ExistingFile);
  run_coordinator->add_option("--session", session_path)->required();

  std::string client_id;
  fs::path client_data;
  auto* run_client = app.add_subcommand("run-client", "Join a training session");
  run_client->add_option("--platform", platform_file)->required()->check(CLI::ExistingFile);
  run_client->add_option("--session", session_path)->required();
  run_client->add_option("--id", client_id)->required();
  run_client->add_option("--data", client_data)->required()->check(CLI::ExistingFile);

  // audit verify
  fs::path audit_file;
  auto* audit_cmd = app.add_subcommand("audit", "Audit logs");
  audit_cmd->require_subcommand(1);
  auto* audit_verify = audit_cmd->add_subcommand("verify", "Check a hash chain");
  audit_verify->add_option("file", audit_file)->required()->check(CLI::ExistingFile);

  // demo
  demo::Options demo_options;
  std::string clone_mode = "leave-one-out";
  auto* demo_cmd = app.add_subcommand("demo", "Run a complete session in this process");
  demo_cmd->add_option("--work", demo_options.work_dir)->required();
  demo_cmd->add_option("--clients", demo_options.clients);
  demo_cmd->add_option("--rows", demo_options.rows_per_client);
  demo_cmd->add_option("--seed", demo_options.data_seed);
  demo_cmd->add_option("--rounds", demo_options.session.max_rounds);
  demo_cmd->add_option("--clone-mode", clone_mode);
  demo_cmd->add_flag("--tcp", demo_options.use_tcp, "Use loopback sockets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*keygen) {
      auto keys = tee::PlatformKeys::Generate();
      keys.Save(keygen_out);
      tee::Platform p(keys);
      std::cout << "platform " << HexEncode(p.platform_id()) << "\nroot "
                << HexEncode(p.root_public_key()) << "\n";
    } else if (*measure) {
      if (!measure_role.empty()) {
        std::cout << demo::RoleMeasurement(measure_role).Hex() << "\n";
      } else if (!measure_code.empty()) {
        Bytes config = measure_config.empty() ? ToBytes("{}") : ReadFileBytes(measure_config);
        std::cout << tee::Measure(ReadFileBytes(measure_code), config).Hex() << "\n";
      } else {
        throw Error(ErrorCode::kInvalidInput, "give --role or a bundle file");
      }
    } else if (*policy_new) {
      Json roster = Json::array();
      for (const auto& c : policy_clients) {
        auto colon = c.find(':');
        if (colon == std::string::npos) {
          throw Error(ErrorCode::kInvalidInput, "--client wants ID:DATASET_HASH");
        }
        roster.push_back({{"client_id", c.substr(0, colon)},
                          {"dataset_hash", c.substr(colon + 1)}});
      }
      SessionConfig session;
      session.clone_mode = CloneMode::kLeaveOneOut;
      Json doc = {
          {"name", policy_name},
          {"measurements",
           {{"coordinator", demo::RoleMeasurement(attest::kRoleCoordinator).Hex()},
            {"client", demo::RoleMeasurement(attest::kRoleClient).Hex()},
            {"policy_manager_self", demo::RoleMeasurement(attest::kRolePolicyManager).Hex()}}},
          {"platform_roots", policy_roots},
          {"roster", roster},
          {"session", session.ToJson()},
          {"secrets", {{{"name", "CHECKPOINT_KEY"}, {"kind", "symmetric-key-256"}}}},
          {"injection",
           {{{"role", "coordinator"},
             {"mechanism", "environment-variable"},
             {"variable", orch::kEnvCheckpointKey},
             {"value", "$$CHECKPOINT_KEY$$"}}}}};
      std::string text = doc.dump(2) + "\n";
      WriteFileAtomic(policy_out, AsBytes(text));
      std::cout << "wrote " << policy_out << "; add dataset and validation keys before upload\n";
    } else if (*policy_hash_cmd) {
      auto p = policy::Policy::Parse(ToString(ReadFileBytes(policy_file)));
      std::cout << HexEncode(p.Hash()) << "\n";
    } else if (*policy_upload) {
      auto s = SessionFile::Load(session_path);
      auto mc = s.ConnectManager(std::string(attest::kRoleOperator), {});
      auto hash = mc->UploadPolicy(ToString(ReadFileBytes(policy_file)));
      try {
        mc->GenerateSecrets(hash);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kAlreadyGenerated) throw;
      }
      std::cout << HexEncode(hash) << "\n";
    } else if (*encrypt) {
      auto s = SessionFile::Load(session_path);
      auto mc = s.ConnectManager(std::string(attest::kRoleOperator), {});
      pm::RemoteCounter counters(*mc);
      crypto::AeadKey key = key_hex.empty()
                                ? crypto::RandomArray<crypto::kAeadKeySize>()
                                : HexDecodeFixed<crypto::kAeadKeySize>(key_hex);
      Bytes plain = ReadFileBytes(data_in);
      fl::Dataset::ParseCsv(ToString(plain));
      auto token = counters.Create();
      auto sf = shield::ShieldEncrypt(plain, key, shield::KeyIdFor(secret_name), token,
                                      counters.service_key());
      WriteFileAtomic(data_out, sf.Serialize());
      std::cout << "dataset_hash " << HexEncode(crypto::Sha256(plain)) << "\n";
      if (key_hex.empty()) {
        // The data owner must place this in the policy as a provided value.
        std::cout << "key " << HexEncode(key) << "\n";
      }
    } else if (*decrypt) {
      auto s = SessionFile::Load(session_path);
      auto mc = s.ConnectManager(std::string(attest::kRoleOperator), {});
      pm::RemoteCounter counters(*mc);
      shield::KeyRing ring;
      ring.Add(shield::KeyIdFor(secret_name), HexDecodeFixed<crypto::kAeadKeySize>(key_hex));
      // Refuses stale copies the same way enclaves do.
      Bytes plain = shield::ShieldDecrypt(shield::ShieldedFile::Parse(ReadFileBytes(decrypt_in)),
                                          ring, shield::StableLookup(counters),
                                          counters.service_key());
      WriteFileAtomic(decrypt_out, plain);
      std::cout << "wrote " << plain.size() << " bytes\n";
    } else if (*counter_init) {
      auto s = SessionFile::Load(session_path);
      auto mc = s.ConnectManager(std::string(attest::kRoleOperator), {});
      pm::RemoteCounter counters(*mc);
      auto token = counters.Create();
      std::cout << HexEncode(token.counter_id) << " " << token.value << "\n";
    } else if (*run_manager) {
      std::signal(SIGINT, OnSignal);
      std::signal(SIGTERM, OnSignal);
      auto enclave = SpawnRole(platform_file, attest::kRolePolicyManager);
      pm::TrustedServices::Options o;
      o.state_dir = state_dir;
      pm::TrustedServices services(enclave, o);
      auto [host, port] = net::ParseEndpoint(listen);
      auto listener = std::make_shared<net::TcpListener>(host, port);
      std::cout << "policy manager " << enclave.measurement().Hex() << " on " << host
                << ":" << listener->port() << std::endl;
      services.Start(listener);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      services.Stop();
    } else if (*run_coordinator) {
      auto s = SessionFile::Load(session_path);
      auto enclave = SpawnRole(platform_file, attest::kRoleCoordinator);
      auto mc = s.ConnectManager(std::string(attest::kRoleCoordinator),
                                 attest::QuoteFrom(enclave));
      orch::CoordinatorOptions o;
      o.state_dir = s.state_dir;
      o.validation_file = s.validation_file;
      o.policy_hash = s.PolicyHash();
      o.join_window = net::Millis(s.join_window_ms);
      auto [host, port] = net::ParseEndpoint(s.coordinator);
      net::TcpListener listener(host, port);
      auto result = orch::Coordinator(enclave, o).Run(*mc, listener);
      std::cout << "session ended: " << fl::ConvergenceName(result.convergence)
                << " after round " << result.model.round << ", validation accuracy "
                << (result.model.history.empty() ? 0.0 : result.model.history.back().accuracy)
                << "\n";
    } else if (*run_client) {
      auto s = SessionFile::Load(session_path);
      auto enclave = SpawnRole(platform_file, attest::kRoleClient);
      auto mc = s.ConnectManager(std::string(attest::kRoleClient), attest::QuoteFrom(enclave));
      orch::ClientOptions o;
      o.client_id = client_id;
      o.dataset_file = client_data;
      o.policy_hash = s.PolicyHash();
      auto [host, port] = net::ParseEndpoint(s.coordinator);
      auto result = orch::ClientAgent(attest::QuoteFrom(enclave), o)
                        .Run(*mc, net::TcpConnect(host, port, net::Millis(30'000)));
      if (!result.admitted) {
        std::cout << "rejected: " << result.rejection << "\n";
        return 1;
      }
      std::cout << "sent " << result.updates_sent << " updates; session ended: "
                << result.end_reason << "\n";
    } else if (*audit_verify) {
      auto v = audit::VerifyAuditFile(audit_file);
      PrintAuditVerdict(v);
      return v.ok ? 0 : 1;
    } else if (*demo_cmd) {
      demo_options.session.clone_mode = ParseCloneMode(clone_mode);
      auto r = demo::Run(demo_options);
      std::cout << "policy " << r.policy_hash << "\n";
      for (const auto& rec : r.session.rounds) {
        std::printf("round %3llu  accuracy %.4f  loss %.5f  flagged %zu  counter %llu\n",
                    static_cast<unsigned long long>(rec.round), rec.metrics.accuracy,
                    rec.metrics.loss, rec.flagged.size(),
                    static_cast<unsigned long long>(rec.checkpoint_counter));
      }
      std::printf("ended: %s after %llu rounds\n",
                  std::string(fl::ConvergenceName(r.session.convergence)).c_str(),
                  static_cast<unsigned long long>(r.session.model.round));
      std::printf("test accuracy %.4f (centralized baseline %.4f)\n", r.test_accuracy,
                  r.centralized_test_accuracy);
      std::cout << "coordinator ";
      PrintAuditVerdict(r.coordinator_audit);
      std::cout << "manager ";
      PrintAuditVerdict(r.manager_audit);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
