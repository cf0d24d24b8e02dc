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

#ifndef EFL_AUDIT_HPP_
#define EFL_AUDIT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "efl/canonical.hpp"
#include "efl/crypto.hpp"

// Append-only, hash-chained event log. One canonical JSON object per line:
//   {"entry_hash":..,"kind":..,"payload":..,"prev_hash":..,"seq":..,"ts":..}
// entry_hash = SHA-256(prev_hash || canonical({kind, payload, seq, ts})).
namespace efl::audit {

struct AuditEntry {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  std::string kind;
  Json payload;
  crypto::Digest prev_hash{};
  crypto::Digest entry_hash{};

  crypto::Digest ComputeHash() const;
  // Hash of the payload alone; independent of time and position.
  crypto::Digest PayloadHash() const;
  Json ToJson() const;
  static AuditEntry FromJson(const Json& json);
};

enum class Break { kNone, kParse, kSequenceGap, kPrevHashMismatch, kHashMismatch };
std::string_view BreakName(Break b);

struct AuditVerdict {
  bool ok = true;
  std::size_t entries = 0;
  // Zero-based index of the first offending entry when !ok.
  std::size_t first_bad = 0;
  Break reason = Break::kNone;
  std::string detail;
};

AuditVerdict VerifyAudit(std::string_view log_text);
AuditVerdict VerifyAuditFile(const std::filesystem::path& path);

// Error(kIntegrity) if the chain does not verify.
std::vector<AuditEntry> ReadAudit(const std::filesystem::path& path);

using Clock = std::function<std::int64_t()>;
std::int64_t WallClockMillis();

class AuditLog {
 public:
  // Verifies an existing log before appending to it; Error(kIntegrity) when
  // it is broken.
  explicit AuditLog(std::filesystem::path path, Clock clock = WallClockMillis);

  AuditEntry Append(std::string kind, Json payload);

  std::vector<AuditEntry> entries() const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  Clock clock_;
  mutable std::mutex mu_;
  std::vector<AuditEntry> entries_;
};

}  // namespace efl::audit

#endif  // EFL_AUDIT_HPP_
