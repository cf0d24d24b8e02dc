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

#include "efl/counter_service.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "efl/error.hpp"

namespace efl::counter {

namespace {

constexpr std::uint8_t kRecordCreate = 1;
constexpr std::uint8_t kRecordValue = 2;
// kind u8 | counter_id 16B | value u64be | crc32 u32be
constexpr std::size_t kRecordSize = 1 + kCounterIdSize + 8 + 4;

std::uint32_t Crc32(ByteView data) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

[[noreturn]] void ThrowErrno(const std::string& what) {
  throw Error(ErrorCode::kIo, what + ": " + std::strerror(errno));
}

}  // namespace

Bytes CounterToken::SignedBytes() const {
  ByteWriter w;
  w.Raw(counter_id);
  w.U64(value);
  w.U8(stable ? 1 : 0);
  return std::move(w).Take();
}

Bytes CounterToken::Serialize() const {
  Bytes out = SignedBytes();
  out.insert(out.end(), signature.begin(), signature.end());
  return out;
}

CounterToken CounterToken::Parse(ByteView bytes) {
  if (bytes.size() != kSerializedSize) {
    throw Error(ErrorCode::kDecode, "counter token has wrong length");
  }
  ByteReader r(bytes);
  CounterToken t;
  t.counter_id = r.Fixed<kCounterIdSize>();
  t.value = r.U64();
  std::uint8_t flag = r.U8();
  if (flag > 1) throw Error(ErrorCode::kDecode, "bad stable flag");
  t.stable = flag == 1;
  t.signature = r.Fixed<crypto::kSignatureSize>();
  return t;
}

bool CounterToken::Verify(const crypto::PublicKey& service_key) const {
  return crypto::VerifySignature(service_key, SignedBytes(), signature);
}

CounterToken CounterClient::WaitStable(const CounterId& id,
                                       std::uint64_t value,
                                       std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    CounterToken t = ReadStable(id);
    if (t.value >= value) return t;
    if (std::chrono::steady_clock::now() >= deadline) {
      throw Error(ErrorCode::kTimeout, "counter did not stabilize in time");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

CounterService::CounterService(crypto::SigningKey key,
                               std::filesystem::path wal_path, Options options)
    : key_(std::move(key)), wal_path_(std::move(wal_path)), options_(options) {
  crypto::Init();
  if (wal_path_.has_parent_path()) {
    std::filesystem::create_directories(wal_path_.parent_path());
  }
  wal_fd_ = ::open(wal_path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0600);
  if (wal_fd_ < 0) ThrowErrno("cannot open counter log " + wal_path_.string());
  Replay();
  if (options_.background) {
    persister_ = std::thread([this] { PersisterLoop(); });
  }
}

CounterService::~CounterService() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (persister_.joinable()) persister_.join();
  if (!crashed_) {
    try {
      StabilizePending();
    } catch (const Error&) {
    }
  }
  if (wal_fd_ >= 0) ::close(wal_fd_);
}

void CounterService::Replay() {
  std::ifstream in(wal_path_, std::ios::binary);
  Bytes log((std::istreambuf_iterator<char>(in)),
            std::istreambuf_iterator<char>());
  std::size_t valid = 0;
  while (valid + kRecordSize <= log.size()) {
    ByteView rec(log.data() + valid, kRecordSize);
    ByteReader r(rec);
    std::uint8_t kind = r.U8();
    CounterId id = r.Fixed<kCounterIdSize>();
    std::uint64_t value = r.U64();
    std::uint32_t crc = r.U32();
    if ((kind != kRecordCreate && kind != kRecordValue) ||
        crc != Crc32(rec.first(kRecordSize - 4))) {
      break;
    }
    if (kind == kRecordValue && !counters_.contains(id)) break;
    Entry& e = counters_[id];
    e.stable = std::max(e.stable, value);
    e.acknowledged = e.stable;
    valid += kRecordSize;
  }
  if (valid != log.size()) {
    if (::ftruncate(wal_fd_, static_cast<off_t>(valid)) != 0) {
      ThrowErrno("cannot truncate torn counter log");
    }
  }
  if (::lseek(wal_fd_, 0, SEEK_END) < 0) ThrowErrno("lseek");
}

void CounterService::AppendRecords(const std::vector<Record>& records,
                                   std::uint8_t kind) {
  ByteWriter w;
  for (const Record& r : records) {
    ByteWriter rec;
    rec.U8(kind);
    rec.Raw(r.id);
    rec.U64(r.value);
    w.Raw(rec.bytes());
    w.U32(Crc32(rec.bytes()));
  }
  const Bytes& buf = w.bytes();
  std::lock_guard lock(wal_mu_);
  std::size_t written = 0;
  while (written < buf.size()) {
    ssize_t n = ::write(wal_fd_, buf.data() + written, buf.size() - written);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) ThrowErrno("counter log write failed");
    written += static_cast<std::size_t>(n);
  }
  if (options_.sync && ::fdatasync(wal_fd_) != 0) {
    ThrowErrno("counter log sync failed");
  }
}

CounterToken CounterService::MakeToken(const CounterId& id,
                                       std::uint64_t value,
                                       bool stable) const {
  CounterToken t;
  t.counter_id = id;
  t.value = value;
  t.stable = stable;
  t.signature = key_.Sign(t.SignedBytes());
  return t;
}

CounterToken CounterService::Create() {
  CounterId id{};
  {
    std::lock_guard lock(mu_);
    if (crashed_) throw Error(ErrorCode::kIo, "counter service is down");
    do {
      crypto::FillRandom(id);
    } while (counters_.contains(id));
  }
  AppendRecords({{id, 1}}, kRecordCreate);
  {
    std::lock_guard lock(mu_);
    counters_[id] = Entry{};
  }
  return MakeToken(id, 1, true);
}

CounterToken CounterService::IncrementAsync(const CounterId& id) {
  std::uint64_t value = 0;
  {
    std::lock_guard lock(mu_);
    if (crashed_) throw Error(ErrorCode::kIo, "counter service is down");
    auto it = counters_.find(id);
    if (it == counters_.end()) {
      throw Error(ErrorCode::kNotFound, "unknown counter " + HexEncode(id));
    }
    value = ++it->second.acknowledged;
    queue_.push_back({id, value});
  }
  queue_cv_.notify_all();
  return MakeToken(id, value, false);
}

CounterToken CounterService::ReadStable(const CounterId& id) {
  std::uint64_t value = 0;
  {
    std::lock_guard lock(mu_);
    if (crashed_) throw Error(ErrorCode::kIo, "counter service is down");
    auto it = counters_.find(id);
    if (it == counters_.end()) {
      throw Error(ErrorCode::kNotFound, "unknown counter " + HexEncode(id));
    }
    value = it->second.stable;
  }
  return MakeToken(id, value, true);
}

CounterToken CounterService::WaitStable(const CounterId& id,
                                        std::uint64_t value,
                                        std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  auto it = counters_.find(id);
  if (it == counters_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown counter " + HexEncode(id));
  }
  if (!stable_cv_.wait_for(lock, timeout, [&] {
        return crashed_ || it->second.stable >= value;
      })) {
    throw Error(ErrorCode::kTimeout, "counter did not stabilize in time");
  }
  if (crashed_) throw Error(ErrorCode::kIo, "counter service is down");
  std::uint64_t stable = it->second.stable;
  lock.unlock();
  return MakeToken(id, stable, true);
}

std::size_t CounterService::PersistBatch(std::size_t max_records) {
  std::vector<Record> batch;
  {
    std::lock_guard lock(mu_);
    if (crashed_) return 0;
    while (!queue_.empty() && batch.size() < max_records) {
      batch.push_back(queue_.front());
      queue_.pop_front();
    }
  }
  if (batch.empty()) return 0;
  AppendRecords(batch, kRecordValue);
  {
    std::lock_guard lock(mu_);
    for (const Record& r : batch) {
      Entry& e = counters_[r.id];
      e.stable = std::max(e.stable, r.value);
    }
  }
  stable_cv_.notify_all();
  return batch.size();
}

std::size_t CounterService::StabilizePending(std::size_t max_records) {
  return PersistBatch(max_records);
}

std::size_t CounterService::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void CounterService::PersisterLoop() {
  while (true) {
    {
      std::unique_lock lock(mu_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (crashed_ || (stopping_ && queue_.empty())) return;
    }
    PersistBatch(SIZE_MAX);
  }
}

void CounterService::Crash() {
  {
    std::lock_guard lock(mu_);
    crashed_ = true;
    stopping_ = true;
    queue_.clear();
  }
  queue_cv_.notify_all();
  stable_cv_.notify_all();
  if (persister_.joinable()) persister_.join();
}

}  // namespace efl::counter
