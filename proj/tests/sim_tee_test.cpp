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

#include <map>
#include <random>
#include <set>

#include "efl/sim_tee.hpp"
#include "test_util.hpp"

namespace efl::tee {
namespace {

using efl::testing::NewPlatform;
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

bool SignatureValid(const Platform& p, const Quote& q) {
  return crypto::VerifySignature(p.root_public_key(), q.SignedBytes(), q.signature);
}

TEST(Measure, DistinctUnderMutation) {
  std::mt19937_64 rng(5);
  Bytes code(256);
  for (auto& b : code) b = static_cast<std::uint8_t>(rng());
  Bytes config = ToBytes("{\"role\":\"client\"}");
  std::map<std::pair<Bytes, Bytes>, Measurement> by_input{{{code, config}, Measure(code, config)}};
  std::set<Measurement> seen{by_input.begin()->second};
  for (int i = 0; i < 1000; ++i) {
    Bytes c = code, f = config;
    switch (i % 4) {
      case 0: c[rng() % c.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255); break;
      case 1: c.push_back(static_cast<std::uint8_t>(rng())); break;
      case 2: f[rng() % f.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255); break;
      case 3: c.resize(1 + rng() % (c.size() - 1)); break;
    }
    Measurement m = Measure(c, f);
    // Mutations repeat now and then; a repeated input must repeat its digest.
    auto [it, fresh] = by_input.emplace(std::make_pair(c, f), m);
    if (!fresh) EXPECT_EQ(it->second, m);
    seen.insert(m);
  }
  EXPECT_GT(by_input.size(), 700u);
  EXPECT_EQ(seen.size(), by_input.size());
}

TEST(Measure, BoundaryBetweenCodeAndConfigMatters) {
  EXPECT_NE(Measure(AsBytes("ab"), AsBytes("c")), Measure(AsBytes("a"), AsBytes("bc")));
  EXPECT_THROW(Measure({}, AsBytes("x")), Error);
}

TEST(Quote, RoundTripAndVerify) {
  Platform p = NewPlatform();
  std::mt19937_64 rng(11);
  for (int i = 0; i < 120; ++i) {
    Bytes code(1 + rng() % 64);
    for (auto& b : code) b = static_cast<std::uint8_t>(rng());
    Enclave e = p.Spawn(code, AsBytes("cfg"), static_cast<std::uint16_t>(rng() % 5));
    auto rd = crypto::RandomArray<kReportDataSize>();
    auto nonce = crypto::RandomArray<kQuoteNonceSize>();
    Quote q = e.GenerateQuote(rd, nonce);
    Bytes wire = q.Serialize();
    ASSERT_EQ(wire.size(), Quote::kSerializedSize);
    Quote back = Quote::Parse(wire);
    EXPECT_EQ(back.identity, e.identity());
    EXPECT_EQ(back.report_data, rd);
    EXPECT_EQ(back.nonce, nonce);
    EXPECT_TRUE(SignatureValid(p, back));
    EXPECT_EQ(back.identity.platform_id, p.platform_id());
  }
}

TEST(Quote, EveryByteIsProtected) {
  Platform p = NewPlatform();
  Enclave e = p.Spawn(AsBytes("code"), AsBytes("cfg"));
  Bytes wire = e.GenerateQuote(crypto::RandomArray<64>(), crypto::RandomArray<32>()).Serialize();
  for (std::size_t i = 0; i < wire.size(); ++i) {
    Bytes t = wire;
    t[i] ^= 0x01;
    if (i < 4) {
      // Version and algorithm identifiers.
      EXPECT_EQ(CodeOf([&] { Quote::Parse(t); }), ErrorCode::kDecode) << i;
      continue;
    }
    EXPECT_FALSE(SignatureValid(p, Quote::Parse(t))) << "byte " << i;
  }
  EXPECT_EQ(CodeOf([&] { Quote::Parse(ByteView(wire).first(wire.size() - 1)); }),
            ErrorCode::kDecode);
}

TEST(Quote, OtherPlatformRootDoesNotVerify) {
  Platform a = NewPlatform(), b = NewPlatform();
  Quote q = a.Spawn(AsBytes("code"), AsBytes("cfg"))
                .GenerateQuote(crypto::RandomArray<64>(), crypto::RandomArray<32>());
  EXPECT_FALSE(SignatureValid(b, q));
}

TEST(Quote, InputSizesChecked) {
  Enclave e = NewPlatform().Spawn(AsBytes("code"), AsBytes("cfg"));
  Bytes short_rd(63), nonce(32), rd(64);
  EXPECT_EQ(CodeOf([&] { e.GenerateQuote(short_rd, nonce); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(CodeOf([&] { e.GenerateQuote(rd, Bytes(31)); }), ErrorCode::kInvalidInput);
}

TEST(Seal, RoundTripSizes) {
  Enclave e = NewPlatform().Spawn(AsBytes("code"), AsBytes("cfg"));
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{1024},
                        std::size_t{1} << 20}) {
    Bytes pt = crypto::RandomBytes(n);
    SealedBlob blob = e.Seal(pt);
    EXPECT_EQ(e.Unseal(SealedBlob::Parse(blob.Serialize())), pt) << n;
  }
}

TEST(Seal, BoundToMeasurementAndPlatform) {
  PlatformKeys keys = PlatformKeys::Generate();
  Platform p(keys), other = NewPlatform();
  Enclave e = p.Spawn(AsBytes("code"), AsBytes("cfg"));
  SealedBlob blob = e.Seal(AsBytes("secret"));

  Enclave sibling = p.Spawn(AsBytes("code2"), AsBytes("cfg"));
  EXPECT_EQ(CodeOf([&] { sibling.Unseal(blob); }), ErrorCode::kSealAuthentication);
  Enclave elsewhere = other.Spawn(AsBytes("code"), AsBytes("cfg"));
  EXPECT_EQ(CodeOf([&] { elsewhere.Unseal(blob); }), ErrorCode::kSealAuthentication);

  // Same code on the same platform after a restart.
  Platform again(keys);
  EXPECT_EQ(ToString(again.Spawn(AsBytes("code"), AsBytes("cfg")).Unseal(blob)), "secret");

  // Relabelling a blob does not get past the key derivation.
  SealedBlob relabelled = blob;
  relabelled.sealing_measurement = sibling.measurement();
  EXPECT_EQ(CodeOf([&] { sibling.Unseal(relabelled); }), ErrorCode::kIntegrity);

  SealedBlob flipped = blob;
  flipped.ciphertext[0] ^= 1;
  EXPECT_EQ(CodeOf([&] { e.Unseal(flipped); }), ErrorCode::kIntegrity);
}

TEST(Seal, ParseRejectsGarbage) {
  Enclave e = NewPlatform().Spawn(AsBytes("code"), AsBytes("cfg"));
  Bytes wire = e.Seal(AsBytes("x")).Serialize();
  Bytes bad = wire;
  bad[0] ^= 0xff;
  EXPECT_EQ(CodeOf([&] { SealedBlob::Parse(bad); }), ErrorCode::kDecode);
  EXPECT_EQ(CodeOf([&] { SealedBlob::Parse(ByteView(wire).first(10)); }), ErrorCode::kDecode);
}

TEST(PlatformKeys, SaveLoad) {
  TempDir dir;
  PlatformKeys keys = PlatformKeys::Generate();
  keys.Save(dir / "p.key");
  PlatformKeys back = PlatformKeys::Load(dir / "p.key");
  EXPECT_EQ(back.platform_id, keys.platform_id);
  EXPECT_EQ(back.root_seed, keys.root_seed);
  EXPECT_EQ(back.platform_secret, keys.platform_secret);
  EXPECT_EQ(Platform(back).root_public_key(), Platform(keys).root_public_key());
  EXPECT_THROW(PlatformKeys::Load(dir / "missing.key"), Error);
}

TEST(DeriveKey, StableAndSeparated) {
  PlatformKeys keys = PlatformKeys::Generate();
  Enclave a = Platform(keys).Spawn(AsBytes("code"), AsBytes("cfg"));
  Enclave a2 = Platform(keys).Spawn(AsBytes("code"), AsBytes("cfg"));
  Enclave b = Platform(keys).Spawn(AsBytes("code"), AsBytes("cfg2"));
  EXPECT_EQ(a.DeriveKey("x"), a2.DeriveKey("x"));
  EXPECT_NE(a.DeriveKey("x"), a.DeriveKey("y"));
  EXPECT_NE(a.DeriveKey("x"), b.DeriveKey("x"));
  Enclave c = NewPlatform().Spawn(AsBytes("code"), AsBytes("cfg"));
  EXPECT_NE(a.DeriveKey("x"), c.DeriveKey("x"));
}

}  // namespace
}  // namespace efl::tee
