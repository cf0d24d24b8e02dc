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

#include "efl/orchestrator.hpp"

#include <algorithm>
#include <chrono>

#include "efl/error.hpp"
#include "efl/file_io.hpp"
#include "efl/file_shield.hpp"
#include "efl/rpc.hpp"

namespace efl::orch {
namespace fs = std::filesystem;
using SteadyClock = std::chrono::steady_clock;

namespace {

constexpr net::Millis kStableTimeout{30'000};
constexpr net::Millis kAcceptPoll{100};
constexpr net::Millis kSendTimeout{5'000};

struct InjectedKey {
  crypto::AeadKey key{};
  shield::KeyId id{};
};

InjectedKey KeyFromBundle(const policy::InjectionBundle& bundle,
                          std::string_view env_var) {
  std::string var(env_var);
  auto value = bundle.environment.find(var);
  auto name = bundle.environment_secrets.find(var);
  if (value == bundle.environment.end() || name == bundle.environment_secrets.end()) {
    throw Error(ErrorCode::kKeyResolution,
                "bundle does not inject a key as " + var);
  }
  InjectedKey k;
  try {
    k.key = HexDecodeFixed<crypto::kAeadKeySize>(value->second);
  } catch (const Error&) {
    throw Error(ErrorCode::kKeyResolution, var + " is not a 256-bit hex key");
  }
  k.id = shield::KeyIdFor(name->second);
  return k;
}

std::string EncodeParams(const fl::ParameterVector& p) {
  return Base64Encode(p.Serialize());
}

fl::ParameterVector DecodeParams(const Json& body, const char* key) {
  return fl::ParameterVector::Parse(RequireBase64(body, key));
}

Json MetricsJson(const fl::RoundMetrics& m) {
  return {{"round", m.round}, {"accuracy", m.accuracy}, {"loss", m.loss}};
}

fl::RoundMetrics MetricsFromJson(const Json& j) {
  return {RequireUnsigned(j, "round"), RequireNumber(j, "accuracy"),
          RequireNumber(j, "loss")};
}

net::Millis Remaining(SteadyClock::time_point deadline) {
  auto left = std::chrono::duration_cast<net::Millis>(deadline - SteadyClock::now());
  return std::max(left, net::Millis(0));
}

}  // namespace

Json RoundRecord::ToJson() const {
  return {{"round", round},
          {"admitted", admitted},
          {"update_hashes", update_hashes},
          {"dropped", dropped},
          {"flagged", flagged},
          {"params_hash", params_hash},
          {"checkpoint_hash", checkpoint_hash},
          {"checkpoint_counter", checkpoint_counter},
          {"metrics", {{"accuracy", metrics.accuracy}, {"loss", metrics.loss}}},
          {"guard", guard}};
}

Bytes OpenShieldedWithBundle(const fs::path& file,
                             const policy::InjectionBundle& bundle,
                             std::string_view env_var,
                             counter::CounterClient& counters) {
  InjectedKey k = KeyFromBundle(bundle, env_var);
  shield::KeyRing ring;
  ring.Add(k.id, k.key);
  auto sf = shield::ShieldedFile::Parse(ReadFileBytes(file));
  return shield::ShieldDecrypt(sf, ring, shield::StableLookup(counters),
                               counters.service_key());
}

struct Coordinator::Peer {
  std::string id;
  attest::SecureChannel channel;
  bool live = true;
};

struct Coordinator::Session {
  policy::Policy policy;
  SessionConfig cfg;
  fl::Dataset validation;
  InjectedKey checkpoint_key;
  counter::CounterId counter_id{};
  std::unique_ptr<audit::AuditLog> audit;
  GlobalModel model;
  std::vector<Peer> peers;
};

Coordinator::Coordinator(tee::Enclave enclave, CoordinatorOptions options)
    : enclave_(std::move(enclave)), options_(std::move(options)) {}

SessionResult Coordinator::Run(pm::ManagerClient& manager, net::Listener& listener) {
  const fs::path& dir = options_.state_dir;
  fs::create_directories(dir);
  pm::RemoteCounter counters(manager);
  const std::string policy_hex = HexEncode(options_.policy_hash);

  auto bundle = manager.RequestSecrets(options_.policy_hash,
                                       policy::kMeasurementCoordinator,
                                       std::nullopt, attest::QuoteFrom(enclave_));
  if (bundle.policy_hash != policy_hex) {
    throw Error(ErrorCode::kIntegrity, "bundle is for a different policy");
  }
  if (options_.on_bundle) options_.on_bundle(bundle);

  Session s;
  s.policy = policy::Policy::FromJson(bundle.policy, /*redacted=*/true);
  s.cfg = s.policy.session;
  Bytes validation_plain = OpenShieldedWithBundle(options_.validation_file, bundle,
                                                  kEnvValidationKey, counters);
  if (s.policy.validation_dataset_hash &&
      crypto::Sha256(validation_plain) != *s.policy.validation_dataset_hash) {
    throw Error(ErrorCode::kIntegrity, "validation dataset does not match the policy");
  }
  s.validation = fl::Dataset::ParseCsv(ToString(validation_plain));
  s.checkpoint_key = KeyFromBundle(bundle, kEnvCheckpointKey);
  s.audit = std::make_unique<audit::AuditLog>(dir / "audit.log", options_.clock);

  SessionResult result;
  result.audit_path = s.audit->path();

  // Counter binding for the checkpoint; created once per state directory.
  const fs::path state_file = dir / "coordinator.json";
  if (fs::exists(state_file)) {
    Json state = ParseJson(ToString(ReadFileBytes(state_file)));
    if (RequireString(state, "policy_hash") != policy_hex) {
      throw Error(ErrorCode::kInvalidConfig,
                  "state directory belongs to another policy");
    }
    s.counter_id =
        HexDecodeFixed<counter::kCounterIdSize>(RequireString(state, "counter_id"));
  } else {
    s.counter_id = counters.Create().counter_id;
    Json state = {{"policy_hash", policy_hex},
                  {"counter_id", HexEncode(s.counter_id)}};
    WriteFileAtomic(state_file, AsBytes(CanonicalEncode(state)));
  }

  // Restore. A pending checkpoint is promoted only if the counter reached
  // its value; anything else that disagrees with the counter is a rollback.
  const fs::path checkpoint = dir / "checkpoint.sfl";
  const fs::path pending = dir / "checkpoint.pending.sfl";
  auto stable = counters.ReadStable(s.counter_id);
  shield::KeyRing ring;
  ring.Add(s.checkpoint_key.id, s.checkpoint_key.key);
  if (fs::exists(pending)) {
    try {
      auto sf = shield::ShieldedFile::Parse(ReadFileBytes(pending));
      if (sf.header.counter_value == stable.value) {
        shield::ShieldDecrypt(sf, ring, shield::StableLookup(counters),
                              counters.service_key());
        fs::rename(pending, checkpoint);
      }
    } catch (const Error&) {
    }
    fs::remove(pending);
  }
  if (fs::exists(checkpoint)) {
    Bytes plain = shield::ShieldDecrypt(
        shield::ShieldedFile::Parse(ReadFileBytes(checkpoint)), ring,
        shield::StableLookup(counters), counters.service_key());
    Json ck = ParseJson(ToString(plain));
    if (RequireString(ck, "policy_hash") != policy_hex) {
      throw Error(ErrorCode::kIntegrity, "checkpoint belongs to another policy");
    }
    s.model.round = RequireUnsigned(ck, "round");
    s.model.params = DecodeParams(ck, "params");
    for (const Json& m : RequireField(ck, "history")) {
      s.model.history.push_back(MetricsFromJson(m));
    }
    result.resumed = true;
    s.audit->Append("session-resumed",
                    {{"policy_hash", policy_hex},
                     {"round", s.model.round},
                     {"checkpoint_hash", HexEncode(crypto::Sha256(plain))}});
  } else {
    if (stable.value > 1) {
      throw Error(ErrorCode::kRollbackDetected,
                  "checkpoint missing while the counter is at " +
                      std::to_string(stable.value));
    }
    s.model.params = fl::ParameterVector::Zeros(s.validation.features() + 1);
    Json roster = Json::array();
    for (const auto& e : s.policy.roster) roster.push_back(e.client_id);
    std::sort(roster.begin(), roster.end());
    s.audit->Append("session-started", {{"policy_hash", policy_hex},
                                        {"roster", roster},
                                        {"session", s.cfg.ToJson()},
                                        {"validation_rows", s.validation.size()}});
  }

  // Admission.
  {
    auto client_policy = s.policy.AttestationFor(policy::kMeasurementClient);
    std::map<std::string, Peer> admitted;
    std::map<std::string, std::string> measurements;
    auto deadline = SteadyClock::now() + options_.join_window;
    while (admitted.size() < s.policy.roster.size()) {
      auto left = Remaining(deadline);
      if (left.count() == 0) break;
      auto t = listener.Accept(std::min(left, kAcceptPoll));
      if (!t) continue;

      attest::HandshakeOptions hs;
      hs.role = std::string(attest::kRoleCoordinator);
      hs.attester = attest::QuoteFrom(enclave_);
      hs.peer_policy = client_policy;
      hs.timeout = options_.handshake_timeout;
      std::optional<attest::SecureChannel> ch;
      try {
        ch.emplace(attest::AttestedHandshake(std::move(t), hs));
      } catch (const attest::RejectedError& e) {
        result.rejected.push_back({"attestation", "",
                                   std::string(attest::CheckName(e.verdict().failed))});
        continue;
      } catch (const Error& e) {
        result.rejected.push_back({"handshake", "", std::string(ErrorCodeName(e.code()))});
        continue;
      }
      auto reject = [&](std::string reason, std::string id, std::string detail) {
        try {
          ch->Send(rpc::Encode(rpc::Type::kSessionEnd,
                               {{"reason", "rejected"}, {"detail", reason}}));
        } catch (const Error&) {
        }
        ch->Close();
        result.rejected.push_back({std::move(reason), std::move(id), std::move(detail)});
      };
      std::string id, dataset_hash, claimed_policy;
      try {
        auto msg = rpc::Decode(ch->Receive(options_.handshake_timeout));
        if (msg.type != rpc::Type::kJoin) throw Error(ErrorCode::kDecode, "expected JOIN");
        id = RequireString(msg.body, "client_id");
        dataset_hash = RequireString(msg.body, "dataset_hash");
        claimed_policy = RequireString(msg.body, "policy_hash");
      } catch (const Error& e) {
        reject("protocol", "", std::string(ErrorCodeName(e.code())));
        continue;
      }
      const auto* entry = s.policy.FindClient(id);
      if (entry == nullptr) {
        reject("roster", id, "not on the roster");
      } else if (claimed_policy != policy_hex) {
        reject("policy", id, "joined with another policy");
      } else if (dataset_hash != HexEncode(entry->dataset_hash)) {
        reject("dataset-hash", id, "dataset does not match the roster entry");
      } else if (admitted.contains(id)) {
        reject("duplicate", id, "already admitted");
      } else {
        try {
          ch->Send(rpc::Encode(rpc::Type::kJoin, {{"admitted", true}, {"client_id", id}}));
        } catch (const Error& e) {
          result.rejected.push_back({"protocol", id, std::string(ErrorCodeName(e.code()))});
          continue;
        }
        measurements[id] = ch->peer().verified_identity->measurement.Hex();
        admitted.emplace(id, Peer{id, std::move(*ch)});
      }
    }
    // Audited in a fixed order so runs with the same inputs log the same way.
    std::sort(result.rejected.begin(), result.rejected.end(),
              [](const Rejection& a, const Rejection& b) {
                return std::tie(a.reason, a.client_id, a.detail) <
                       std::tie(b.reason, b.client_id, b.detail);
              });
    for (const auto& r : result.rejected) {
      s.audit->Append("client-rejected", {{"reason", r.reason},
                                          {"client_id", r.client_id},
                                          {"detail", r.detail}});
    }
    for (auto& [id, peer] : admitted) {
      s.audit->Append("client-admitted",
                      {{"client_id", id}, {"measurement", measurements[id]}});
      result.admitted.push_back(id);
      s.peers.push_back(std::move(peer));
    }
  }

  auto live_ids = [&] {
    std::vector<std::string> ids;
    for (const auto& p : s.peers) {
      if (p.live) ids.push_back(p.id);
    }
    return ids;
  };
  auto send_all = [&](rpc::Type type, const Json& body) {
    Bytes frame = rpc::Encode(type, body);
    for (auto& p : s.peers) {
      if (!p.live) continue;
      try {
        p.channel.Send(frame);
      } catch (const Error&) {
        p.live = false;
      }
    }
  };
  auto fail_session = [&](const std::string& why) {
    s.audit->Append("session-failed", {{"round", s.model.round}, {"reason", why}});
    send_all(rpc::Type::kSessionEnd, {{"reason", "session-failed"}, {"round", s.model.round}});
    throw Error(ErrorCode::kSessionFailed, why);
  };

  if (s.peers.size() < s.cfg.min_clients) {
    fail_session("only " + std::to_string(s.peers.size()) + " clients admitted");
  }

  // Rounds.
  std::uint32_t quorum_failures = 0;
  result.convergence = s.model.history.empty()
                           ? fl::Convergence::kContinue
                           : fl::CheckConvergence(s.model.history, s.cfg);
  while (result.convergence == fl::Convergence::kContinue) {
    const std::uint64_t r = s.model.round + 1;
    RoundRecord rec;
    rec.round = r;
    rec.admitted = live_ids();

    send_all(rpc::Type::kModelBroadcast,
             {{"round", r}, {"params", EncodeParams(s.model.params)}});

    std::vector<fl::ModelUpdate> updates;
    auto deadline = SteadyClock::now() + net::Millis(s.cfg.round_deadline_ms);
    for (auto& p : s.peers) {
      if (!p.live) continue;
      auto drop = [&](const std::string& reason, bool disconnect) {
        if (disconnect) p.live = false;
        rec.dropped.push_back(p.id);
        s.audit->Append("update-dropped",
                        {{"round", r}, {"client_id", p.id}, {"reason", reason}});
      };
      while (true) {
        Bytes frame;
        try {
          frame = p.channel.Receive(Remaining(deadline));
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kTimeout) {
            drop("late", false);
          } else {
            drop(std::string(ErrorCodeName(e.code())), true);
          }
          break;
        }
        try {
          auto msg = rpc::Decode(frame);
          if (msg.type != rpc::Type::kUpdateSubmit) continue;
          if (RequireUnsigned(msg.body, "round") != r) continue;  // stale
          fl::ModelUpdate u;
          u.client_id = RequireString(msg.body, "client_id");
          u.round = r;
          u.params = DecodeParams(msg.body, "params");
          u.num_examples = RequireUnsigned(msg.body, "num_examples");
          u.params_hash = HexDecodeFixed<crypto::kDigestSize>(
              RequireString(msg.body, "params_hash"));
          if (u.client_id != p.id) throw Error(ErrorCode::kInvalidInput, "client id");
          if (u.params.dimension() != s.model.params.dimension()) {
            throw Error(ErrorCode::kInvalidInput, "dimension");
          }
          u.Validate();
          rec.update_hashes[p.id] = HexEncode(u.params_hash);
          updates.push_back(std::move(u));
        } catch (const Error& e) {
          drop("invalid-update", false);
        }
        break;
      }
    }

    try {
      if (updates.size() < s.cfg.min_clients) {
        throw Error(ErrorCode::kRoundQuorum,
                    std::to_string(updates.size()) + " updates, need " +
                        std::to_string(s.cfg.min_clients));
      }
      guard::GuardReport report;
      bool guarded = false;
      if (s.cfg.clone_mode != CloneMode::kOff) {
        std::size_t m = s.cfg.clone_mode == CloneMode::kLeaveOneOut
                            ? updates.size() - 1
                            : s.cfg.clone_subset_size;
        if (m >= 1 && m < updates.size()) {
          report = guard::RunGuard(updates, s.validation, s.cfg, r);
          guarded = true;
        }
      }
      rec.guard = guarded ? report.ToJson() : Json{{"skipped", true}};
      rec.flagged.assign(report.flagged.begin(), report.flagged.end());
      std::vector<fl::ModelUpdate> accepted;
      for (auto& u : updates) {
        if (!report.flagged.contains(u.client_id)) accepted.push_back(u);
      }
      if (accepted.empty()) {
        throw Error(ErrorCode::kRoundQuorum, "every update was flagged");
      }
      fl::ParameterVector next = fl::Aggregate(accepted);
      if (!next.AllFinite()) {
        throw Error(ErrorCode::kNumericalDivergence, "aggregate is not finite");
      }
      fl::Evaluation eval = fl::Evaluate(next, s.validation);
      rec.metrics = {r, eval.accuracy, eval.loss};
      auto history = s.model.history;
      history.push_back(rec.metrics);

      Json history_json = Json::array();
      for (const auto& m : history) history_json.push_back(MetricsJson(m));
      std::string plain = CanonicalEncode({{"policy_hash", policy_hex},
                                           {"round", r},
                                           {"params", EncodeParams(next)},
                                           {"history", history_json}});
      auto token = counters.IncrementAsync(s.counter_id);
      auto sf = shield::ShieldEncrypt(AsBytes(plain), s.checkpoint_key.key,
                                      s.checkpoint_key.id, token,
                                      counters.service_key());
      WriteFileAtomic(pending, sf.Serialize());
      counters.WaitStable(s.counter_id, token.value, kStableTimeout);
      fs::rename(pending, checkpoint);

      rec.params_hash = HexEncode(next.Hash());
      rec.checkpoint_hash = HexEncode(crypto::Sha256(AsBytes(plain)));
      rec.checkpoint_counter = token.value;
      s.audit->Append("round-commit", rec.ToJson());
      s.model = {r, std::move(next), std::move(history)};
      result.rounds.push_back(rec);
      quorum_failures = 0;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kRoundQuorum &&
          e.code() != ErrorCode::kNumericalDivergence) {
        throw;
      }
      ++quorum_failures;
      s.audit->Append("round-aborted", {{"round", r},
                                        {"attempt", quorum_failures},
                                        {"reason", std::string(ErrorCodeName(e.code()))}});
      if (quorum_failures >= options_.max_quorum_failures) {
        fail_session("round " + std::to_string(r) + " failed " +
                     std::to_string(quorum_failures) + " times");
      }
      continue;
    }

    send_all(rpc::Type::kRoundCommit, {{"round", r},
                                       {"params", EncodeParams(s.model.params)},
                                       {"accuracy", rec.metrics.accuracy},
                                       {"loss", rec.metrics.loss},
                                       {"flagged", rec.flagged}});
    if (options_.halt_after_round == r) {
      result.halted = true;
      result.model = s.model;
      return result;
    }
    result.convergence = fl::CheckConvergence(s.model.history, s.cfg);
  }

  const auto& last = s.model.history.back();
  s.audit->Append("session-end",
                  {{"convergence", std::string(fl::ConvergenceName(result.convergence))},
                   {"round", s.model.round},
                   {"params_hash", HexEncode(s.model.params.Hash())},
                   {"accuracy", last.accuracy}});
  send_all(rpc::Type::kSessionEnd,
           {{"reason", std::string(fl::ConvergenceName(result.convergence))},
            {"round", s.model.round}});
  for (auto& p : s.peers) p.channel.Close();
  result.model = s.model;
  return result;
}

ClientAgent::ClientAgent(attest::QuoteSource attester, ClientOptions options)
    : attester_(std::move(attester)), options_(std::move(options)) {}

ClientResult ClientAgent::Run(pm::ManagerClient& manager,
                              std::unique_ptr<net::Transport> coordinator) {
  ClientResult result;
  pm::RemoteCounter counters(manager);
  const std::string policy_hex = HexEncode(options_.policy_hash);
  policy::InjectionBundle bundle =
      options_.preset_bundle
          ? *options_.preset_bundle
          : manager.RequestSecrets(options_.policy_hash, policy::kMeasurementClient,
                                   options_.client_id, attester_);
  if (options_.on_bundle) options_.on_bundle(bundle);
  policy::Policy view = policy::Policy::FromJson(bundle.policy, /*redacted=*/true);
  const SessionConfig cfg = view.session;

  Bytes plain = OpenShieldedWithBundle(options_.dataset_file, bundle,
                                       kEnvDatasetKey, counters);
  std::string dataset_hash = HexEncode(crypto::Sha256(plain));
  fl::Dataset data = fl::Dataset::ParseCsv(ToString(plain));

  attest::HandshakeOptions hs;
  hs.role = std::string(attest::kRoleClient);
  hs.attester = attester_;
  hs.peer_policy = view.AttestationFor(policy::kMeasurementCoordinator);
  hs.timeout = options_.handshake_timeout;
  auto ch = attest::AttestedHandshake(std::move(coordinator), hs);

  ch.Send(rpc::Encode(rpc::Type::kJoin, {{"client_id", options_.client_id},
                                         {"dataset_hash", dataset_hash},
                                         {"policy_hash", policy_hex}}));
  try {
    auto reply = rpc::Decode(ch.Receive(options_.idle_timeout));
    if (reply.type != rpc::Type::kJoin) {
      result.rejection = reply.body.value("detail", std::string("rejected"));
      return result;
    }
    result.admitted = true;
    while (true) {
      auto msg = rpc::Decode(ch.Receive(options_.idle_timeout));
      switch (msg.type) {
        case rpc::Type::kModelBroadcast: {
          std::uint64_t round = RequireUnsigned(msg.body, "round");
          auto params = DecodeParams(msg.body, "params");
          auto seed = fl::DeriveSeed(cfg.rng_seed, options_.client_id, round);
          auto u = fl::LocalTrain(params, data, cfg, seed, options_.client_id, round);
          if (options_.tamper_update) u = options_.tamper_update(std::move(u));
          ch.Send(rpc::Encode(rpc::Type::kUpdateSubmit,
                              {{"client_id", u.client_id},
                               {"round", u.round},
                               {"params", EncodeParams(u.params)},
                               {"num_examples", u.num_examples},
                               {"params_hash", HexEncode(u.params_hash)}}));
          ++result.updates_sent;
          break;
        }
        case rpc::Type::kRoundCommit:
          result.commits.push_back({RequireUnsigned(msg.body, "round"),
                                    RequireNumber(msg.body, "accuracy"),
                                    RequireNumber(msg.body, "loss")});
          result.final_params = DecodeParams(msg.body, "params");
          break;
        case rpc::Type::kSessionEnd:
          result.end_reason = RequireString(msg.body, "reason");
          return result;
        default:
          break;
      }
    }
  } catch (const Error& e) {
    result.end_reason = std::string(ErrorCodeName(e.code()));
  }
  return result;
}

}  // namespace efl::orch
