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

#ifndef EFL_COUNTER_SERVICE_HPP_
#define EFL_COUNTER_SERVICE_HPP_

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include "efl/bytes.hpp"
#include "efl/crypto.hpp"

// Signed monotonic counters with acknowledged-then-stabilized increments.
// An increment returns a provisional token at once; its value becomes stable
// (and is served by ReadStable) only after the write-ahead log has been
// written and synced.
namespace efl::counter {

inline constexpr std::size_t kCounterIdSize = 16;
using CounterId = std::array<std::uint8_t, kCounterIdSize>;

// counter_id 16B | value u64be | stable u8 | Ed25519 signature.
struct CounterToken {
  CounterId counter_id{};
  std::uint64_t value = 0;
  bool stable = false;
  crypto::Signature signature{};

  Bytes SignedBytes() const;
  Bytes Serialize() const;
  static CounterToken Parse(ByteView bytes);
  bool Verify(const crypto::PublicKey& service_key) const;

  static constexpr std::size_t kSerializedSize =
      kCounterIdSize + 8 + 1 + crypto::kSignatureSize;
};

// Operations shared by the in-process service and its remote proxy.
class CounterClient {
 public:
  virtual ~CounterClient() = default;

  virtual CounterToken Create() = 0;
  // Error(kNotFound) for unknown counters.
  virtual CounterToken IncrementAsync(const CounterId& id) = 0;
  virtual CounterToken ReadStable(const CounterId& id) = 0;
  virtual crypto::PublicKey service_key() = 0;

  // Polls until the stable value reaches `value`; Error(kTimeout) otherwise.
  virtual CounterToken WaitStable(const CounterId& id, std::uint64_t value,
                                  std::chrono::milliseconds timeout);
};

class CounterService : public CounterClient {
 public:
  struct Options {
    // fsync after each batch; tests that only model process crashes may
    // skip it.
    bool sync = true;
    // When false, nothing stabilizes until StabilizePending() is called.
    bool background = true;
  };

  // Replays `wal_path` (created if absent), discarding a torn tail.
  CounterService(crypto::SigningKey key, std::filesystem::path wal_path,
                 Options options);
  CounterService(crypto::SigningKey key, std::filesystem::path wal_path)
      : CounterService(std::move(key), std::move(wal_path), Options{}) {}
  ~CounterService() override;

  CounterService(const CounterService&) = delete;
  CounterService& operator=(const CounterService&) = delete;

  CounterToken Create() override;
  CounterToken IncrementAsync(const CounterId& id) override;
  CounterToken ReadStable(const CounterId& id) override;
  crypto::PublicKey service_key() override { return key_.public_key(); }
  CounterToken WaitStable(const CounterId& id, std::uint64_t value,
                          std::chrono::milliseconds timeout) override;

  // Persists up to `max_records` pending increments; returns how many.
  std::size_t StabilizePending(std::size_t max_records = SIZE_MAX);
  std::size_t pending() const;

  // Simulated crash: stops without persisting acknowledged increments.
  void Crash();

 private:
  struct Entry {
    std::uint64_t acknowledged = 1;
    std::uint64_t stable = 1;
  };
  struct Record {
    CounterId id;
    std::uint64_t value;
  };

  CounterToken MakeToken(const CounterId& id, std::uint64_t value,
                         bool stable) const;
  void Replay();
  void AppendRecords(const std::vector<Record>& records, std::uint8_t kind);
  std::size_t PersistBatch(std::size_t max_records);
  void PersisterLoop();

  crypto::SigningKey key_;
  std::filesystem::path wal_path_;
  Options options_;
  int wal_fd_ = -1;

  // Guards counters_, queue_ and the flags below. WAL writes happen outside
  // it under wal_mu_.
  mutable std::mutex mu_;
  std::map<CounterId, Entry> counters_;
  std::condition_variable queue_cv_;
  std::condition_variable stable_cv_;
  std::deque<Record> queue_;
  bool stopping_ = false;
  bool crashed_ = false;

  std::mutex wal_mu_;
  std::thread persister_;
};

}  // namespace efl::counter

#endif  // EFL_COUNTER_SERVICE_HPP_
