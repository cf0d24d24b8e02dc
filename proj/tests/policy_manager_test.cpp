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

#include <gtest/gtest.h>

#include <future>

#include "efl/policy_manager.hpp"
#include "policy_fixture.hpp"
#include "test_util.hpp"

namespace efl::pm {
namespace {

using efl::testing::ContainmentScan;
using efl::testing::NewPlatform;
using efl::testing::PolicyFixture;
using efl::testing::TempDir;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidInput;
}

struct World {
  tee::PlatformKeys manager_keys = tee::PlatformKeys::Generate();
  tee::Platform manager_platform{manager_keys};
  tee::Platform worker_platform = NewPlatform();
  tee::Platform rogue_platform = NewPlatform();
  tee::Enclave coordinator = worker_platform.Spawn(AsBytes("coord"), AsBytes("{}"));
  tee::Enclave client = worker_platform.Spawn(AsBytes("client"), AsBytes("{}"));
  PolicyFixture fixture;
  TempDir dir;

  World() { fixture.roots = {worker_platform.root_public_key()}; }

  tee::Enclave ManagerEnclave() const {
    return manager_platform.Spawn(AsBytes("manager"), AsBytes("{}"));
  }
  std::unique_ptr<PolicyManager> Open() const {
    return std::make_unique<PolicyManager>(ManagerEnclave(), dir.path() / "pm",
                                           [] { return std::int64_t{42}; });
  }
};

// Quote from `enclave` bound to a fresh request channel.
struct Request {
  tee::QuoteNonce nonce = crypto::RandomArray<32>();
  attest::ChannelBinding binding;
  Bytes quote;

  Request(const tee::Enclave& enclave, std::string role, bool fresh = true) {
    binding = {crypto::RandomArray<32>(), std::move(role), nonce};
    tee::QuoteNonce used = fresh ? nonce : crypto::RandomArray<32>();
    quote = enclave.GenerateQuote(binding.ReportData(), used).Serialize();
  }
};

TEST(PolicyManager, UploadIsIdempotentAndNamesAreBound) {
  World w;
  auto pm = w.Open();
  std::string doc = w.fixture.Document().dump();
  auto h1 = pm->UploadPolicy(doc);
  auto h2 = pm->UploadPolicy(Json::parse(doc).dump(2));
  EXPECT_EQ(h1, h2);
  Json changed = w.fixture.Document();
  changed["min_svn"] = 3;
  EXPECT_EQ(CodeOf([&] { pm->UploadPolicy(changed.dump()); }), ErrorCode::kPolicyConflict);
  EXPECT_EQ(CodeOf([&] { pm->UploadPolicy("{}"); }), ErrorCode::kPolicyInvalid);
  EXPECT_EQ(pm->audit_log().size(), 1u);
  EXPECT_TRUE(pm->FindPolicy(h1));
}

TEST(PolicyManager, GenerationRules) {
  World w;
  auto pm = w.Open();
  auto h = pm->UploadPolicy(w.fixture.Document().dump());
  crypto::Digest unknown{};
  EXPECT_EQ(CodeOf([&] { pm->GenerateSecrets(unknown); }), ErrorCode::kNotFound);
  EXPECT_FALSE(pm->SecretsGenerated(h));
  pm->GenerateSecrets(h);
  EXPECT_TRUE(pm->SecretsGenerated(h));
  EXPECT_EQ(CodeOf([&] { pm->GenerateSecrets(h); }), ErrorCode::kAlreadyGenerated);
}

TEST(PolicyManager, RequestOrderOfChecks) {
  World w;
  auto pm = w.Open();
  auto h = pm->UploadPolicy(w.fixture.Document().dump());
  Request r(w.client, "client");
  crypto::Digest unknown{};
  EXPECT_EQ(CodeOf([&] { pm->RequestSecrets(unknown, "client", "alice", r.quote, r.nonce, r.binding); }),
            ErrorCode::kNotFound);
  EXPECT_EQ(CodeOf([&] { pm->RequestSecrets(h, "auditor", std::nullopt, r.quote, r.nonce, r.binding); }),
            ErrorCode::kRoleUnknown);
  EXPECT_EQ(CodeOf([&] { pm->RequestSecrets(h, "client", "alice", r.quote, r.nonce, r.binding); }),
            ErrorCode::kNotFound);
  pm->GenerateSecrets(h);
  EXPECT_EQ(CodeOf([&] { pm->RequestSecrets(h, "client", "alice", Bytes(10), r.nonce, r.binding); }),
            ErrorCode::kAccessDenied);
}

// Every combination of (genuine measurement, trusted platform, fresh nonce);
// only the all-true cell releases anything, and each denial is audited with
// the failed check.
TEST(PolicyManager, GatingMatrix) {
  World w;
  auto pm = w.Open();
  auto h = pm->UploadPolicy(w.fixture.Document().dump());
  pm->GenerateSecrets(h);
  tee::Enclave patched = w.worker_platform.Spawn(AsBytes("client-patched"), AsBytes("{}"));
  tee::Enclave rogue_genuine = w.rogue_platform.Spawn(AsBytes("client"), AsBytes("{}"));
  tee::Enclave rogue_patched = w.rogue_platform.Spawn(AsBytes("client-patched"), AsBytes("{}"));
  int released = 0;
  for (int cell = 0; cell < 8; ++cell) {
    bool genuine = cell & 1, trusted = cell & 2, fresh = cell & 4;
    const tee::Enclave& e = trusted ? (genuine ? w.client : patched)
                                    : (genuine ? rogue_genuine : rogue_patched);
    Request r(e, "client", fresh);
    std::size_t before = pm->audit_log().size();
    try {
      auto bundle = pm->RequestSecrets(h, "client", "alice", r.quote, r.nonce, r.binding);
      ++released;
      EXPECT_TRUE(genuine && trusted && fresh);
      EXPECT_EQ(bundle.environment.at("DATA_KEY"), "alice-data-key");
      EXPECT_EQ(pm->audit_log().entries().back().kind, "secrets-released");
    } catch (const AccessDenied& d) {
      EXPECT_FALSE(genuine && trusted && fresh);
      auto expected = !trusted ? attest::Check::kSignature
                      : !fresh ? attest::Check::kNonce
                               : attest::Check::kMeasurement;
      EXPECT_EQ(d.verdict().failed, expected) << cell;
      auto last = pm->audit_log().entries().back();
      EXPECT_EQ(last.kind, "access-denied");
      EXPECT_EQ(last.payload["check"], std::string(attest::CheckName(expected)));
    }
    EXPECT_EQ(pm->audit_log().size(), before + 1);
  }
  EXPECT_EQ(released, 1);
}

TEST(PolicyManager, QuoteMustBindTheRequestChannel) {
  World w;
  auto pm = w.Open();
  auto h = pm->UploadPolicy(w.fixture.Document().dump());
  pm->GenerateSecrets(h);
  Request r(w.client, "client");
  attest::ChannelBinding other = r.binding;
  other.ephemeral_public_key = crypto::RandomArray<32>();
  try {
    pm->RequestSecrets(h, "client", "alice", r.quote, r.nonce, other);
    FAIL();
  } catch (const AccessDenied& d) {
    EXPECT_EQ(d.verdict().failed, attest::Check::kBinding);
  }
  // A client quote does not pass for the coordinator role.
  Request as_coord(w.client, "coordinator");
  try {
    pm->RequestSecrets(h, "coordinator", std::nullopt, as_coord.quote, as_coord.nonce,
                       as_coord.binding);
    FAIL();
  } catch (const AccessDenied& d) {
    EXPECT_EQ(d.verdict().failed, attest::Check::kMeasurement);
  }
}

TEST(PolicyManager, BundlesAreScoped) {
  World w;
  auto pm = w.Open();
  auto h = pm->UploadPolicy(w.fixture.Document().dump());
  pm->GenerateSecrets(h);
  Request rc(w.coordinator, "coordinator");
  auto coord = pm->RequestSecrets(h, "coordinator", std::nullopt, rc.quote, rc.nonce, rc.binding);
  Request ra(w.client, "client");
  auto alice = pm->RequestSecrets(h, "client", "alice", ra.quote, ra.nonce, ra.binding);
  Request rb(w.client, "client");
  auto bob = pm->RequestSecrets(h, "client", "bob", rb.quote, rb.nonce, rb.binding);

  const std::string& model_key = coord.environment.at("MODEL_KEY");
  EXPECT_EQ(model_key.size(), 64u);
  std::string token = coord.files.at("conf/session.ini").substr(6, 32);
  EXPECT_EQ(alice.arguments.at(0), "--token=" + token);
  EXPECT_EQ(bob.arguments.at(0), "--token=" + token);
  EXPECT_EQ(alice.ToJson().dump().find(model_key), std::string::npos);
  EXPECT_EQ(alice.ToJson().dump().find("bob-data-key"), std::string::npos);
  EXPECT_EQ(bob.ToJson().dump().find("alice-data-key"), std::string::npos);
  EXPECT_EQ(coord.ToJson().dump().find("alice-data-key"), std::string::npos);

  Request rm(w.client, "client");
  EXPECT_EQ(CodeOf([&] { pm->RequestSecrets(h, "client", "mallory", rm.quote, rm.nonce, rm.binding); }),
            ErrorCode::kAccessDenied);
}

TEST(PolicyManager, StorageHoldsNoPlaintextAndSurvivesRestart) {
  World w;
  crypto::Digest h;
  std::string model_key;
  {
    auto pm = w.Open();
    h = pm->UploadPolicy(w.fixture.Document().dump());
    pm->GenerateSecrets(h);
    Request rc(w.coordinator, "coordinator");
    model_key = pm->RequestSecrets(h, "coordinator", std::nullopt, rc.quote, rc.nonce, rc.binding)
                    .environment.at("MODEL_KEY");
  }
  ContainmentScan scan;
  scan.AddNeedle(model_key, "model key");
  scan.AddNeedle(HexDecode(model_key), "model key bytes");
  scan.AddNeedle("alice-data-key", "alice");
  scan.AddNeedle("bob-data-key", "bob");
  Bytes stored = ContainmentScan::ReadTree(w.dir.path() / "pm");
  EXPECT_EQ(scan.Hits(stored), 0u);

  auto pm = w.Open();
  EXPECT_TRUE(pm->SecretsGenerated(h));
  Request rc(w.coordinator, "coordinator");
  EXPECT_EQ(pm->RequestSecrets(h, "coordinator", std::nullopt, rc.quote, rc.nonce, rc.binding)
                .environment.at("MODEL_KEY"),
            model_key);
  EXPECT_EQ(CodeOf([&] { pm->GenerateSecrets(h); }), ErrorCode::kAlreadyGenerated);
  EXPECT_TRUE(audit::VerifyAuditFile(w.dir.path() / "pm" / "audit.log").ok);

  // A different manager build cannot open the state.
  tee::Enclave other = w.manager_platform.Spawn(AsBytes("manager-v2"), AsBytes("{}"));
  EXPECT_EQ(CodeOf([&] { PolicyManager(other, w.dir.path() / "pm"); }),
            ErrorCode::kSealAuthentication);
}

TEST(PolicyManager, InterruptedGenerationIsDiscarded) {
  World w;
  crypto::Digest h;
  {
    auto pm = w.Open();
    h = pm->UploadPolicy(w.fixture.Document().dump());
  }
  auto partial = w.dir.path() / "pm" / "secrets" / (HexEncode(h) + ".partial");
  std::filesystem::create_directories(partial);
  WriteFileAtomic(partial / "MODEL_KEY.sealed", AsBytes("junk"));
  auto pm = w.Open();
  EXPECT_FALSE(pm->SecretsGenerated(h));
  EXPECT_FALSE(std::filesystem::exists(partial));
  pm->GenerateSecrets(h);
}

TEST(PolicyManager, ConcurrentRequests) {
  World w;
  auto pm = w.Open();
  auto h = pm->UploadPolicy(w.fixture.Document().dump());
  pm->GenerateSecrets(h);
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 16; ++i) {
    futures.push_back(std::async(std::launch::async, [&, i] {
      std::string id = i % 2 ? "alice" : "bob";
      Request r(w.client, "client");
      return pm->RequestSecrets(h, "client", id, r.quote, r.nonce, r.binding).environment.at("DATA_KEY");
    }));
  }
  for (int i = 0; i < 16; ++i) {
    EXPECT_EQ(futures[i].get(), i % 2 ? "alice-data-key" : "bob-data-key");
  }
  EXPECT_TRUE(audit::VerifyAuditFile(w.dir.path() / "pm" / "audit.log").ok);
}

}  // namespace
}  // namespace efl::pm
