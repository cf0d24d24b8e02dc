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

// Values frozen from tests/oracles/vectors.py, which recomputes them with
// hashlib/struct/json only.

#include <gtest/gtest.h>

#include "efl/audit.hpp"
#include "efl/file_shield.hpp"
#include "efl/fl_core.hpp"
#include "efl/policy.hpp"
#include "efl/sim_tee.hpp"

namespace efl {
namespace {

TEST(Vectors, Measurement) {
  auto m = tee::Measure(AsBytes("enclavefl-test-code"), AsBytes(R"({"role":"client"})"));
  EXPECT_EQ(m.Hex(), "ed8bdf28389c31cc1fe7579e4dbadf6fefbce0bc61bc3e5f27aade6eea32d7d4");
}

TEST(Vectors, SeedDerivation) {
  EXPECT_EQ(fl::DeriveSeed({7, 11, 13}), 14678140099675767573ULL);
  EXPECT_EQ(fl::DeriveSeed(42, "client-01", 5), 13556689039784093034ULL);
}

TEST(Vectors, KeyId) {
  EXPECT_EQ(HexEncode(shield::KeyIdFor("DATA_KEY_1")), "30591c1ecf9f0d37b9a53aaf46b45a5e");
}

TEST(Vectors, ParameterHash) {
  fl::ParameterVector p({0.5, -1.25, 3.0});
  EXPECT_EQ(HexEncode(p.Hash()),
            "74d433ea1433cc2775f7050fc446927d80bafc0c0d1a0c87c437307e00b98bcb");
}

TEST(Vectors, AuditEntryHash) {
  audit::AuditEntry e;
  e.seq = 0;
  e.timestamp_ms = 1000;
  e.kind = "test";
  e.payload = {{"b", "x"}, {"a", 1}};
  EXPECT_EQ(HexEncode(e.ComputeHash()),
            "0caa8eaa06a4659750cd64cde236ddfdeec683c737e1a46706e3c7010a226560");
}

TEST(Vectors, PolicyHash) {
  // Deliberately out of canonical order and with insignificant whitespace.
  const char* doc = R"({
    "injection": [{"value": "$$K$$", "variable": "KEY",
                   "mechanism": "environment-variable", "role": "client"}],
    "secrets": [{"kind": "provided-value", "name": "P", "value": "pv"},
                {"name": "K", "kind": "symmetric-key-256"}],
    "roster": [{"dataset_hash": "6666666666666666666666666666666666666666666666666666666666666666", "client_id": "b"},
               {"client_id": "a", "dataset_hash": "5555555555555555555555555555555555555555555555555555555555555555"}],
    "platform_roots": ["4444444444444444444444444444444444444444444444444444444444444444"],
    "measurements": {
      "policy_manager_self": "3333333333333333333333333333333333333333333333333333333333333333",
      "coordinator": "2222222222222222222222222222222222222222222222222222222222222222",
      "client": "1111111111111111111111111111111111111111111111111111111111111111"},
    "name": "vector"
  })";
  auto p = policy::Policy::Parse(doc);
  EXPECT_EQ(HexEncode(p.Hash()),
            "b908f8c2145abdc830c77cb0daef9836ee157257cf96c50ee11787ea36be16e3");
}

}  // namespace
}  // namespace efl
