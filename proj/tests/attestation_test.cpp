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

#include "efl/attestation.hpp"
#include "test_util.hpp"

namespace efl::attest {
namespace {

using namespace std::chrono_literals;
using efl::testing::NewPlatform;

struct Party {
  tee::Platform platform = NewPlatform();
  tee::Enclave enclave;
  explicit Party(std::string_view code)
      : enclave(platform.Spawn(AsBytes(code), AsBytes("cfg"))) {}
  AttestationPolicy Expect() const {
    return {{platform.root_public_key()}, {enclave.measurement()}, 0};
  }
};

struct Outcome {
  std::optional<SecureChannel> channel;
  std::optional<ErrorCode> error;
  std::optional<Check> check;
};

Outcome RunSide(std::unique_ptr<net::Transport> t, HandshakeOptions opts) {
  Outcome o;
  try {
    o.channel.emplace(AttestedHandshake(std::move(t), opts));
  } catch (const RejectedError& e) {
    o.error = e.code();
    o.check = e.verdict().failed;
  } catch (const Error& e) {
    o.error = e.code();
  }
  return o;
}

std::pair<Outcome, Outcome> Handshake(std::unique_ptr<net::Transport> ta,
                                      HandshakeOptions a,
                                      std::unique_ptr<net::Transport> tb,
                                      HandshakeOptions b) {
  a.timeout = b.timeout = 3s;
  auto fa = std::async(std::launch::async, RunSide, std::move(ta), a);
  auto fb = std::async(std::launch::async, RunSide, std::move(tb), b);
  return {fa.get(), fb.get()};
}

TEST(VerifyQuote, ChecksInOrder) {
  Party p("client-code");
  tee::QuoteNonce nonce = crypto::RandomArray<32>();
  ChannelBinding binding{crypto::RandomArray<32>(), "client", nonce};
  tee::Quote q = p.enclave.GenerateQuote(binding.ReportData(), nonce);
  AttestationPolicy pol = p.Expect();
  EXPECT_TRUE(VerifyQuote(q, pol, nonce, binding).accepted());

  tee::Quote forged = q;
  forged.identity.svn = 9;
  EXPECT_EQ(VerifyQuote(forged, pol, nonce).failed, Check::kSignature);

  tee::QuoteNonce other = crypto::RandomArray<32>();
  EXPECT_EQ(VerifyQuote(q, pol, other).failed, Check::kNonce);

  AttestationPolicy wrong_m = pol;
  wrong_m.expected_measurements = {tee::Measure(AsBytes("x"), AsBytes("y"))};
  EXPECT_EQ(VerifyQuote(q, wrong_m, nonce).failed, Check::kMeasurement);

  AttestationPolicy svn = pol;
  svn.min_svn = 2;
  EXPECT_EQ(VerifyQuote(q, svn, nonce).failed, Check::kSvn);

  ChannelBinding wrong = binding;
  wrong.role = "coordinator";
  EXPECT_EQ(VerifyQuote(q, pol, nonce, wrong).failed, Check::kBinding);

  AttestationPolicy untrusted = pol;
  untrusted.trusted_roots = {NewPlatform().root_public_key()};
  EXPECT_EQ(VerifyQuote(q, untrusted, nonce).failed, Check::kSignature);
}

TEST(VerifyQuote, PolicyMustPinSomething) {
  AttestationPolicy empty;
  EXPECT_THROW(empty.Validate(), Error);
}

// Both sides attest and check each other; only the genuine/genuine cell
// yields a channel.
TEST(Handshake, MutualMatrix) {
  Party a("coordinator-code"), b("client-code");
  Party impostor_a("coordinator-code-patched"), impostor_b("client-code-patched");
  for (bool a_ok : {true, false}) {
    for (bool b_ok : {true, false}) {
      auto [ta, tb] = net::MakePipe();
      HandshakeOptions oa{"coordinator", QuoteFrom(a_ok ? a.enclave : impostor_a.enclave),
                          b.Expect(), 3s};
      HandshakeOptions ob{"client", QuoteFrom(b_ok ? b.enclave : impostor_b.enclave),
                          a.Expect(), 3s};
      // Impostors run on their own platforms; pin both roots so the
      // measurement is what rejects them.
      oa.peer_policy->trusted_roots.push_back(impostor_b.platform.root_public_key());
      ob.peer_policy->trusted_roots.push_back(impostor_a.platform.root_public_key());
      auto [ra, rb] = Handshake(std::move(ta), oa, std::move(tb), ob);
      SCOPED_TRACE(std::to_string(a_ok) + std::to_string(b_ok));
      if (a_ok && b_ok) {
        ASSERT_TRUE(ra.channel && rb.channel);
        ra.channel->Send(ToBytes("ping"));
        EXPECT_EQ(ToString(rb.channel->Receive(1s)), "ping");
        EXPECT_EQ(rb.channel->peer().verified_identity->measurement, a.enclave.measurement());
        continue;
      }
      EXPECT_FALSE(ra.channel && rb.channel);
      if (!b_ok) EXPECT_EQ(ra.check, Check::kMeasurement);
      if (!a_ok) EXPECT_EQ(rb.check, Check::kMeasurement);
    }
  }
}

TEST(Handshake, OneSidedAndDeferredVerification) {
  Party server("manager-code");
  auto [ta, tb] = net::MakePipe();
  auto [ra, rb] = Handshake(std::move(ta), {"operator", {}, server.Expect(), 3s},
                            std::move(tb), {"policy-manager", QuoteFrom(server.enclave),
                                            std::nullopt, 3s});
  ASSERT_TRUE(ra.channel && rb.channel);
  EXPECT_TRUE(rb.channel->peer().quote.empty());
  EXPECT_EQ(rb.channel->peer().role, "operator");
  EXPECT_FALSE(rb.channel->peer().verified_identity);
}

TEST(Handshake, MissingQuoteIsRejected) {
  Party server("manager-code");
  auto [ta, tb] = net::MakePipe();
  auto [ra, rb] = Handshake(std::move(ta), {"operator", {}, std::nullopt, 3s},
                            std::move(tb), {"policy-manager", {}, server.Expect(), 3s});
  EXPECT_EQ(rb.check, Check::kDecode);
}

// A relay that swaps in its own key share while forwarding the genuine
// enclave's quote cannot make that quote vouch for its key.
TEST(Handshake, SubstitutedKeyShareBreaksBinding) {
  Party client("client-code");
  crypto::KeyAgreement attacker;
  auto [ta, tb] = net::MakePipe();
  auto mitm = net::Intercept(std::move(ta), [&](Bytes f) -> std::vector<Bytes> {
    if (f.size() == 5 + 32 && f[4] == static_cast<std::uint8_t>(HandshakeMessage::kKeyShare)) {
      std::copy(attacker.public_key().begin(), attacker.public_key().end(), f.begin() + 5);
    }
    return {f};
  });
  Party server("server-code");
  auto [ra, rb] = Handshake(std::move(mitm), {"client", QuoteFrom(client.enclave), std::nullopt, 3s},
                            std::move(tb), {"coordinator", QuoteFrom(server.enclave),
                                            client.Expect(), 3s});
  EXPECT_EQ(rb.check, Check::kBinding);
  EXPECT_FALSE(rb.channel);
}

// Replaying a quote captured from an earlier session fails the nonce check.
TEST(Handshake, ReplayedQuoteIsStale) {
  Party client("client-code"), server("server-code");
  Bytes recorded;
  {
    auto [ta, tb] = net::MakePipe();
    auto rec = net::Intercept(std::move(ta), [&](Bytes f) -> std::vector<Bytes> {
      if (f.size() > 5 && f[4] == static_cast<std::uint8_t>(HandshakeMessage::kQuote)) recorded = f;
      return {f};
    });
    auto [ra, rb] = Handshake(std::move(rec), {"client", QuoteFrom(client.enclave), std::nullopt, 3s},
                              std::move(tb), {"coordinator", {}, client.Expect(), 3s});
    ASSERT_TRUE(rb.channel);
  }
  ASSERT_FALSE(recorded.empty());
  auto [ta, tb] = net::MakePipe();
  auto replay = net::Intercept(std::move(ta), [&](Bytes f) -> std::vector<Bytes> {
    if (f.size() > 4 && f[4] == static_cast<std::uint8_t>(HandshakeMessage::kQuote)) return {recorded};
    return {f};
  });
  auto [ra, rb] = Handshake(std::move(replay), {"client", QuoteFrom(client.enclave), std::nullopt, 3s},
                            std::move(tb), {"coordinator", {}, client.Expect(), 3s});
  EXPECT_EQ(rb.check, Check::kNonce);
}

struct ChannelPair {
  std::optional<SecureChannel> a, b;
};

ChannelPair Connect(std::unique_ptr<net::Transport> ta, std::unique_ptr<net::Transport> tb) {
  auto [ra, rb] = Handshake(std::move(ta), {"client", {}, std::nullopt, 3s},
                            std::move(tb), {"coordinator", {}, std::nullopt, 3s});
  EXPECT_TRUE(ra.channel && rb.channel);
  return {std::move(ra.channel), std::move(rb.channel)};
}

ErrorCode ReceiveError(SecureChannel& c) {
  try {
    c.Receive(1s);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidInput;
}

// Frame filters only touch application frames: the handshake sends four.
net::FrameFilter AfterHandshake(std::function<std::vector<Bytes>(Bytes)> f) {
  auto n = std::make_shared<int>(0);
  return [n, f](Bytes frame) -> std::vector<Bytes> {
    if ((*n)++ < 4) return {frame};
    return f(std::move(frame));
  };
}

TEST(Channel, ReplayIsDetected) {
  auto [ta, tb] = net::MakePipe();
  auto p = Connect(net::Intercept(std::move(ta), AfterHandshake([](Bytes f) {
                     return std::vector<Bytes>{f, f};
                   })),
                   std::move(tb));
  p.a->Send(ToBytes("once"));
  EXPECT_EQ(ToString(p.b->Receive(1s)), "once");
  EXPECT_EQ(ReceiveError(*p.b), ErrorCode::kChannelReplay);
  EXPECT_TRUE(p.b->closed());
}

TEST(Channel, TruncationIsDetected) {
  auto [ta, tb] = net::MakePipe();
  auto p = Connect(net::Intercept(std::move(ta), AfterHandshake([](Bytes f) {
                     f.resize(f.size() - 3);
                     return std::vector<Bytes>{f};
                   })),
                   std::move(tb));
  p.a->Send(ToBytes("a message long enough to cut"));
  EXPECT_EQ(ReceiveError(*p.b), ErrorCode::kDecode);
}

TEST(Channel, TamperingIsDetected) {
  for (std::size_t pos : {std::size_t{13}, std::size_t{20}, std::size_t{30}}) {
    auto [ta, tb] = net::MakePipe();
    auto p = Connect(net::Intercept(std::move(ta), AfterHandshake([pos](Bytes f) {
                       f[pos] ^= 0x80;
                       return std::vector<Bytes>{f};
                     })),
                     std::move(tb));
    p.a->Send(ToBytes("attack at dawn"));
    EXPECT_EQ(ReceiveError(*p.b), ErrorCode::kChannelIntegrity) << pos;
  }
}

TEST(Channel, DroppedFrameIsDetected) {
  auto [ta, tb] = net::MakePipe();
  auto p = Connect(net::Intercept(std::move(ta), AfterHandshake([n = 0](Bytes f) mutable {
                     return ++n == 1 ? std::vector<Bytes>{} : std::vector<Bytes>{f};
                   })),
                   std::move(tb));
  p.a->Send(ToBytes("first"));
  p.a->Send(ToBytes("second"));
  EXPECT_EQ(ReceiveError(*p.b), ErrorCode::kChannelReplay);
}

TEST(Channel, PayloadsNeverAppearOnTheWire) {
  for (int trial = 0; trial < 100; ++trial) {
    auto capture = std::make_shared<net::WireCapture>();
    auto [ta, tb] = net::MakePipe();
    auto p = Connect(net::Tap(std::move(ta), capture, "a"), net::Tap(std::move(tb), capture, "b"));
    Bytes secret = crypto::RandomBytes(48);
    p.a->Send(secret);
    EXPECT_EQ(p.b->Receive(1s), secret);
    p.b->Send(secret);
    EXPECT_EQ(p.a->Receive(1s), secret);
    Bytes wire = capture->AllBytes();
    for (std::size_t off = 0; off + 16 <= secret.size(); off += 8) {
      ASSERT_FALSE(Contains(wire, ByteView(secret).subspan(off, 16))) << trial;
    }
  }
}

}  // namespace
}  // namespace efl::attest
