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

#include <fstream>
#include <random>

#include "efl/audit.hpp"
#include "efl/file_io.hpp"
#include "test_util.hpp"

namespace efl::audit {
namespace {

using efl::testing::TempDir;

std::string ReadText(const std::filesystem::path& p) { return ToString(ReadFileBytes(p)); }

// Index of the line holding byte `pos`.
std::size_t LineOf(std::string_view text, std::size_t pos) {
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

std::filesystem::path SampleLog(const TempDir& dir, int n) {
  std::int64_t t = 1000;
  AuditLog log(dir / "audit.log", [&t] { return t++; });
  for (int i = 0; i < n; ++i) {
    log.Append(i % 2 ? "round-commit" : "client-admitted",
               {{"round", i}, {"client_id", "client-" + std::to_string(i)}, {"note", "x\tyé"}});
  }
  return dir / "audit.log";
}

TEST(Audit, ChainVerifiesAndReopens) {
  TempDir dir;
  auto path = SampleLog(dir, 5);
  AuditVerdict v = VerifyAuditFile(path);
  EXPECT_TRUE(v.ok);
  EXPECT_EQ(v.entries, 5u);
  {
    AuditLog log(path, [] { return std::int64_t{9}; });
    EXPECT_EQ(log.size(), 5u);
    AuditEntry e = log.Append("session-end", {{"ok", true}});
    EXPECT_EQ(e.seq, 5u);
    EXPECT_EQ(e.prev_hash, ReadAudit(path)[4].entry_hash);
  }
  EXPECT_EQ(VerifyAuditFile(path).entries, 6u);
  auto entries = ReadAudit(path);
  EXPECT_EQ(entries[0].prev_hash, crypto::Digest{});
  EXPECT_EQ(entries[5].kind, "session-end");
  EXPECT_EQ(entries[0].timestamp_ms, 1000);
  EXPECT_TRUE(VerifyAudit("").ok);
}

TEST(Audit, PayloadHashIgnoresPositionAndTime) {
  AuditEntry a, b;
  a.payload = b.payload = {{"k", 1}};
  a.seq = 3;
  b.timestamp_ms = 99;
  EXPECT_EQ(a.PayloadHash(), b.PayloadHash());
  EXPECT_NE(a.ComputeHash(), b.ComputeHash());
}

TEST(Audit, BreaksAreClassified) {
  TempDir dir;
  std::string text = ReadText(SampleLog(dir, 4));
  std::vector<std::string> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    auto nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl - pos + 1));
    pos = nl + 1;
  }
  auto join = [](const std::vector<std::string>& ls) {
    std::string s;
    for (const auto& l : ls) s += l;
    return s;
  };

  auto dropped = lines;
  dropped.erase(dropped.begin() + 1);
  AuditVerdict gap = VerifyAudit(join(dropped));
  EXPECT_EQ(gap.reason, Break::kSequenceGap);
  EXPECT_EQ(gap.first_bad, 1u);

  auto swapped = lines;
  std::swap(swapped[1], swapped[2]);
  EXPECT_EQ(VerifyAudit(join(swapped)).first_bad, 1u);

  // Rewriting a payload and recomputing its own hash still breaks the link
  // to the next entry.
  AuditEntry e = AuditEntry::FromJson(ParseJson(lines[1].substr(0, lines[1].size() - 1)));
  e.payload["round"] = 42;
  e.entry_hash = e.ComputeHash();
  auto rewritten = lines;
  rewritten[1] = CanonicalEncode(e.ToJson()) + "\n";
  AuditVerdict link = VerifyAudit(join(rewritten));
  EXPECT_EQ(link.reason, Break::kPrevHashMismatch);
  EXPECT_EQ(link.first_bad, 2u);

  AuditVerdict cut = VerifyAudit(text.substr(0, text.size() - 1));
  EXPECT_EQ(cut.reason, Break::kParse);
  EXPECT_EQ(cut.first_bad, 3u);

  AuditVerdict spaced = VerifyAudit(lines[0].substr(0, 1) + " " + lines[0].substr(1));
  EXPECT_EQ(spaced.reason, Break::kParse);

  auto truncated = lines;
  truncated.pop_back();
  EXPECT_TRUE(VerifyAudit(join(truncated)).ok);
}

// Every single-byte change is pinned to the entry that holds it.
TEST(Audit, SingleByteTamperIsLocalized) {
  TempDir dir;
  std::string text = ReadText(SampleLog(dir, 12));
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t pos = rng() % text.size();
    std::string bad = text;
    char replacement;
    do {
      replacement = static_cast<char>(rng() % 256);
    } while (replacement == bad[pos]);
    bad[pos] = replacement;
    AuditVerdict v = VerifyAudit(bad);
    ASSERT_FALSE(v.ok) << pos;
    EXPECT_EQ(v.first_bad, LineOf(text, pos)) << "pos " << pos << " reason " << BreakName(v.reason);
  }
}

TEST(Audit, OpeningBrokenLogFails) {
  TempDir dir;
  auto path = SampleLog(dir, 3);
  std::string text = ReadText(path);
  text[text.size() / 2] ^= 0x01;
  WriteFileAtomic(path, AsBytes(text));
  try {
    AuditLog log(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIntegrity);
  }
}

}  // namespace
}  // namespace efl::audit
