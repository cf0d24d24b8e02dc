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

#include <random>

#include "efl/policy.hpp"
#include "policy_fixture.hpp"

namespace efl::policy {
namespace {

using efl::testing::PolicyFixture;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidInput;
}

TEST(Template, Rendering) {
  std::map<std::string, std::string> s = {{"A", "1"}, {"B_2", "two"}, {"E", ""}};
  EXPECT_EQ(RenderTemplate("x=$$A$$,y=$$B_2$$", s), "x=1,y=two");
  EXPECT_EQ(RenderTemplate("$$A$$$$A$$", s), "11");
  EXPECT_EQ(RenderTemplate("[$$E$$]", s), "[]");
  // "$$" without a closing "NAME$$" is literal text.
  EXPECT_EQ(RenderTemplate("cost $$ 5", s), "cost $$ 5");
  EXPECT_EQ(RenderTemplate("$$$$", s), "$$$$");
  EXPECT_EQ(RenderTemplate("$$1A$$", s), "$$1A$$");
  EXPECT_EQ(RenderTemplate("$$A-B$$", s), "$$A-B$$");
  EXPECT_EQ(RenderTemplate("$$$A$$", s), "$1");
  EXPECT_EQ(RenderTemplate("", s), "");
  // Substituted values are not rescanned.
  EXPECT_EQ(RenderTemplate("$$A$$", {{"A", "$$B_2$$"}}), "$$B_2$$");
  try {
    RenderTemplate("key=$$MISSING$$", s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTemplate);
    EXPECT_NE(std::string(e.what()).find("$$MISSING$$"), std::string::npos);
  }
  EXPECT_EQ(TemplateTokens("$$A$$ and $$B$$ and $$ C"), (std::vector<std::string>{"A", "B"}));
}

TEST(Policy, ParsesFixture) {
  PolicyFixture f;
  Policy p = Policy::FromJson(f.Document());
  EXPECT_EQ(p.name, "fixture");
  EXPECT_EQ(p.roster.size(), 2u);
  EXPECT_EQ(p.FindSecret("TOKEN")->random_bytes, 16u);
  EXPECT_EQ(p.FindSecret("TOKEN")->KindName(), "random-hex-16");
  EXPECT_EQ(*p.FindSecret("ALICE_KEY")->value, "alice-data-key");
  EXPECT_EQ(p.session.clone_mode, CloneMode::kOff);
  EXPECT_EQ(p.AttestationFor("client").expected_measurements.front(), f.client);
  EXPECT_EQ(CodeOf([&] { p.AttestationFor("auditor"); }), ErrorCode::kRoleUnknown);
  EXPECT_EQ(Policy::FromJson(p.ToJson()).Hash(), p.Hash());
}

// Reordering keys, roster, secrets and roots never changes the hash;
// reordering injection rules does.
TEST(Policy, CanonicalUnderShuffles) {
  PolicyFixture f;
  f.roots = {crypto::RandomArray<32>(), crypto::RandomArray<32>(), crypto::RandomArray<32>()};
  f.clients = {"c1", "c2", "c3", "c4", "c5"};
  Json base = f.Document();
  base["injection"] = Json::array({base["injection"][0], base["injection"][1], base["injection"][2]});
  crypto::Digest h = Policy::FromJson(base).Hash();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    Json d = base;
    for (const char* key : {"roster", "secrets", "platform_roots"}) {
      auto& arr = d[key];
      std::vector<Json> v(arr.begin(), arr.end());
      std::shuffle(v.begin(), v.end(), rng);
      arr = Json(v);
    }
    // Go through the text parser with varying whitespace as well.
    std::string text = d.dump(static_cast<int>(rng() % 3));
    EXPECT_EQ(Policy::Parse(text).Hash(), h);
  }
  Json swapped = base;
  std::swap(swapped["injection"][0], swapped["injection"][2]);
  EXPECT_NE(Policy::FromJson(swapped).Hash(), h);
}

TEST(Policy, RejectsInvalidDocuments) {
  PolicyFixture f;
  auto invalid = [&](const std::function<void(Json&)>& mutate) {
    Json d = f.Document();
    mutate(d);
    return CodeOf([&] { Policy::FromJson(d); });
  };
  const std::vector<std::pair<std::string, std::function<void(Json&)>>> cases = {
      {"unknown key", [](Json& d) { d["extra"] = 1; }},
      {"no name", [](Json& d) { d.erase("name"); }},
      {"missing measurement", [](Json& d) { d["measurements"].erase("client"); }},
      {"short measurement", [](Json& d) { d["measurements"]["client"] = "abcd"; }},
      {"no roots", [](Json& d) { d["platform_roots"] = Json::array(); }},
      {"empty roster", [](Json& d) { d["roster"] = Json::array(); }},
      {"duplicate client", [](Json& d) { d["roster"].push_back(d["roster"][0]); }},
      {"bad secret name", [](Json& d) { d["secrets"][0]["name"] = "9X"; }},
      {"duplicate secret", [](Json& d) { d["secrets"].push_back(d["secrets"][0]); }},
      {"unknown kind", [](Json& d) { d["secrets"][0]["kind"] = "rsa-2048"; }},
      {"random-hex-0", [](Json& d) { d["secrets"][1]["kind"] = "random-hex-0"; }},
      {"random-hex-x", [](Json& d) { d["secrets"][1]["kind"] = "random-hex-x"; }},
      {"missing provided value", [](Json& d) { d["secrets"][2].erase("value"); }},
      {"value on generated", [](Json& d) { d["secrets"][0]["value"] = "v"; }},
      {"undeclared token", [](Json& d) { d["injection"][2]["value"] = "$$NOPE$$"; }},
      {"bad role", [](Json& d) { d["injection"][0]["role"] = "auditor"; }},
      {"client_id on coordinator", [](Json& d) { d["injection"][0]["client_id"] = "alice"; }},
      {"unknown client rule", [](Json& d) { d["injection"][3]["client_id"] = "mallory"; }},
      {"absolute path", [](Json& d) { d["injection"][1]["path"] = "/etc/passwd"; }},
      {"dotdot path", [](Json& d) { d["injection"][1]["path"] = "a/../../b"; }},
      {"bad env name", [](Json& d) { d["injection"][0]["variable"] = "A-B"; }},
      {"bad mechanism", [](Json& d) { d["injection"][0]["mechanism"] = "stdin"; }},
      {"session invalid", [](Json& d) { d["session"]["min_clients"] = 5; }},
      {"session mistyped", [](Json& d) { d["session"]["max_rounds"] = "ten"; }},
      {"roots not list", [](Json& d) { d["platform_roots"] = "aa"; }},
  };
  for (const auto& [name, mutate] : cases) {
    EXPECT_EQ(invalid(mutate), ErrorCode::kPolicyInvalid) << name;
  }
  EXPECT_EQ(CodeOf([] { Policy::Parse("{not json"); }), ErrorCode::kPolicyInvalid);
}

TEST(Policy, PublicViewDropsProvidedValues) {
  PolicyFixture f;
  Policy p = Policy::FromJson(f.Document());
  Json view = p.PublicView();
  EXPECT_EQ(view.dump().find("alice-data-key"), std::string::npos);
  EXPECT_NO_THROW(Policy::FromJson(view, true));
  EXPECT_EQ(CodeOf([&] { Policy::FromJson(view); }), ErrorCode::kPolicyInvalid);
}

TEST(Bundle, ScopedByRoleAndClient) {
  PolicyFixture f;
  Policy p = Policy::FromJson(f.Document());
  std::map<std::string, std::string> secrets = {{"MODEL_KEY", "mk"}, {"TOKEN", "tt"},
                                                {"ALICE_KEY", "ak"}, {"BOB_KEY", "bk"}};
  auto h = p.Hash();

  InjectionBundle c = BuildBundle(p, h, "coordinator", std::nullopt, secrets);
  EXPECT_EQ(c.environment, (std::map<std::string, std::string>{{"MODEL_KEY", "mk"}}));
  EXPECT_EQ(c.environment_secrets.at("MODEL_KEY"), "MODEL_KEY");
  EXPECT_EQ(c.files.at("conf/session.ini"), "token=tt\n");
  EXPECT_TRUE(c.arguments.empty());
  EXPECT_FALSE(c.client_id);

  InjectionBundle a = BuildBundle(p, h, "client", "alice", secrets);
  EXPECT_EQ(a.arguments, std::vector<std::string>{"--token=tt"});
  EXPECT_EQ(a.environment, (std::map<std::string, std::string>{{"DATA_KEY", "ak"}}));
  EXPECT_EQ(a.environment_secrets.at("DATA_KEY"), "ALICE_KEY");
  EXPECT_TRUE(a.files.empty());
  EXPECT_EQ(a.ToJson().dump().find("bk"), std::string::npos);
  EXPECT_EQ(a.ToJson().dump().find("mk"), std::string::npos);

  InjectionBundle b = BuildBundle(p, h, "client", "bob", secrets);
  EXPECT_EQ(b.environment.at("DATA_KEY"), "bk");

  EXPECT_EQ(CodeOf([&] { BuildBundle(p, h, "client", "mallory", secrets); }),
            ErrorCode::kAccessDenied);
  EXPECT_EQ(CodeOf([&] { BuildBundle(p, h, "client", std::nullopt, secrets); }),
            ErrorCode::kAccessDenied);
  EXPECT_EQ(CodeOf([&] { BuildBundle(p, h, "policy_manager_self", std::nullopt, secrets); }),
            ErrorCode::kRoleUnknown);

  InjectionBundle back = InjectionBundle::FromJson(a.ToJson());
  EXPECT_EQ(back.ToJson(), a.ToJson());
}

}  // namespace
}  // namespace efl::policy
