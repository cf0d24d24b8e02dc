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

#include "efl/audit.hpp"

#include <chrono>
#include <fstream>

#include "efl/error.hpp"
#include "efl/file_io.hpp"

namespace efl::audit {

crypto::Digest AuditEntry::ComputeHash() const {
  Json body = {{"kind", kind}, {"payload", payload}, {"seq", seq},
               {"ts", timestamp_ms}};
  crypto::Sha256Hasher h;
  h.Update(prev_hash).Update(CanonicalEncode(body));
  return h.Finish();
}

crypto::Digest AuditEntry::PayloadHash() const { return CanonicalHash(payload); }

Json AuditEntry::ToJson() const {
  return {{"entry_hash", HexEncode(entry_hash)},
          {"kind", kind},
          {"payload", payload},
          {"prev_hash", HexEncode(prev_hash)},
          {"seq", seq},
          {"ts", timestamp_ms}};
}

AuditEntry AuditEntry::FromJson(const Json& json) {
  AuditEntry e;
  e.seq = RequireUnsigned(json, "seq");
  const Json& ts = RequireField(json, "ts");
  if (!ts.is_number_integer()) {
    throw Error(ErrorCode::kDecode, "field 'ts' must be an integer");
  }
  e.timestamp_ms = ts.get<std::int64_t>();
  e.kind = RequireString(json, "kind");
  e.payload = RequireField(json, "payload");
  e.prev_hash =
      HexDecodeFixed<crypto::kDigestSize>(RequireString(json, "prev_hash"));
  e.entry_hash =
      HexDecodeFixed<crypto::kDigestSize>(RequireString(json, "entry_hash"));
  if (json.size() != 6) {
    throw Error(ErrorCode::kDecode, "unexpected fields in audit entry");
  }
  return e;
}

std::string_view BreakName(Break b) {
  switch (b) {
    case Break::kNone: return "none";
    case Break::kParse: return "unparseable-entry";
    case Break::kSequenceGap: return "sequence-gap";
    case Break::kPrevHashMismatch: return "prev-hash-mismatch";
    case Break::kHashMismatch: return "entry-hash-mismatch";
  }
  return "unknown";
}

namespace {

// Parses and checks one line against the chain state; returns Break::kNone
// and fills `entry` on success.
Break CheckLine(std::string_view line, std::uint64_t expected_seq,
                const crypto::Digest& prev, AuditEntry& entry,
                std::string& detail) {
  try {
    entry = AuditEntry::FromJson(ParseJson(line));
  } catch (const Error& e) {
    detail = e.what();
    return Break::kParse;
  }
  if (CanonicalEncode(entry.ToJson()) != line) {
    detail = "entry is not in canonical form";
    return Break::kParse;
  }
  if (entry.seq != expected_seq) {
    detail = "expected seq " + std::to_string(expected_seq) + ", found " +
             std::to_string(entry.seq);
    return Break::kSequenceGap;
  }
  if (entry.prev_hash != prev) {
    detail = "prev_hash does not match the preceding entry";
    return Break::kPrevHashMismatch;
  }
  if (entry.ComputeHash() != entry.entry_hash) {
    detail = "entry_hash does not match contents";
    return Break::kHashMismatch;
  }
  return Break::kNone;
}

}  // namespace

AuditVerdict VerifyAudit(std::string_view text) {
  AuditVerdict v;
  crypto::Digest prev{};
  std::size_t pos = 0;
  std::size_t index = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    AuditEntry entry;
    Break b = nl == std::string_view::npos
                  ? Break::kParse
                  : CheckLine(line, index, prev, entry, v.detail);
    if (nl == std::string_view::npos) v.detail = "unterminated final entry";
    if (b != Break::kNone) {
      v.ok = false;
      v.first_bad = index;
      v.reason = b;
      v.entries = index;
      return v;
    }
    prev = entry.entry_hash;
    pos = nl + 1;
    ++index;
  }
  v.entries = index;
  return v;
}

AuditVerdict VerifyAuditFile(const std::filesystem::path& path) {
  Bytes raw = ReadFileBytes(path);
  return VerifyAudit(ToString(raw));
}

std::vector<AuditEntry> ReadAudit(const std::filesystem::path& path) {
  Bytes raw = ReadFileBytes(path);
  std::string text = ToString(raw);
  AuditVerdict v = VerifyAudit(text);
  if (!v.ok) {
    throw Error(ErrorCode::kIntegrity,
                "audit log broken at entry " + std::to_string(v.first_bad) +
                    " (" + std::string(BreakName(v.reason)) + "): " + v.detail);
  }
  std::vector<AuditEntry> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    out.push_back(AuditEntry::FromJson(ParseJson(text.substr(pos, nl - pos))));
    pos = nl + 1;
  }
  return out;
}

std::int64_t WallClockMillis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

AuditLog::AuditLog(std::filesystem::path path, Clock clock)
    : path_(std::move(path)), clock_(std::move(clock)) {
  if (std::filesystem::exists(path_)) {
    entries_ = ReadAudit(path_);
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
}

AuditEntry AuditLog::Append(std::string kind, Json payload) {
  std::lock_guard lock(mu_);
  AuditEntry e;
  e.seq = entries_.size();
  e.timestamp_ms = clock_();
  e.kind = std::move(kind);
  e.payload = std::move(payload);
  if (!entries_.empty()) e.prev_hash = entries_.back().entry_hash;
  e.entry_hash = e.ComputeHash();
  std::string line = CanonicalEncode(e.ToJson()) + "\n";
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out << line;
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path_.string());
  entries_.push_back(std::move(e));
  return entries_.back();
}

std::vector<AuditEntry> AuditLog::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

}  // namespace efl::audit
