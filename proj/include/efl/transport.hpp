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

#ifndef EFL_TRANSPORT_HPP_
#define EFL_TRANSPORT_HPP_

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "efl/bytes.hpp"

// Frame-oriented byte transports. Every frame starts with a u32 big-endian
// length of the bytes that follow it; transports move whole frames and leave
// content validation to the protocol layer.
namespace efl::net {

using Millis = std::chrono::milliseconds;

inline constexpr std::uint32_t kMaxFrameSize = 64u << 20;

class Transport {
 public:
  virtual ~Transport() = default;

  virtual void Send(ByteView frame) = 0;
  // Error(kTimeout) if nothing arrives in time, Error(kChannelClosed) once the
  // peer has closed and the queue is drained, Error(kDecode) for a frame cut
  // short by end of stream.
  virtual Bytes Receive(Millis timeout) = 0;
  virtual void Close() = 0;
};

// Connected pair of in-memory endpoints with deterministic FIFO delivery.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> MakePipe();

// Thread-safe record of every frame that crossed a tapped transport.
class WireCapture {
 public:
  struct Frame {
    std::string link;
    Bytes bytes;
  };

  void Record(const std::string& link, ByteView bytes);
  std::vector<Frame> Frames() const;
  // Concatenation of all captured bytes, for containment scans.
  Bytes AllBytes() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<Frame> frames_;
};

// Records outgoing and incoming frames into `capture` under `link`.
std::unique_ptr<Transport> Tap(std::unique_ptr<Transport> inner,
                               std::shared_ptr<WireCapture> capture,
                               std::string link);

// Rewrites each outgoing frame into zero or more frames; used to simulate an
// active network attacker.
using FrameFilter = std::function<std::vector<Bytes>(Bytes)>;
std::unique_ptr<Transport> Intercept(std::unique_ptr<Transport> inner,
                                     FrameFilter on_send);

class Listener {
 public:
  virtual ~Listener() = default;
  // Returns nullptr on timeout.
  virtual std::unique_ptr<Transport> Accept(Millis timeout) = 0;
  virtual void Close() = 0;
};

// In-memory listener: Connect() hands one pipe end to the caller and queues
// the other for Accept().
class InProcListener : public Listener {
 public:
  InProcListener();
  ~InProcListener() override;

  std::unique_ptr<Transport> Connect();
  std::unique_ptr<Transport> Accept(Millis timeout) override;
  void Close() override;

 private:
  struct State;
  std::shared_ptr<State> state_;
};

class TcpListener : public Listener {
 public:
  // `port` 0 picks an ephemeral port.
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener() override;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<Transport> Accept(Millis timeout) override;
  void Close() override;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<Transport> TcpConnect(const std::string& host,
                                      std::uint16_t port, Millis timeout);

// Splits "host:port"; Error(kInvalidInput) when malformed.
std::pair<std::string, std::uint16_t> ParseEndpoint(const std::string& text);

}  // namespace efl::net

#endif  // EFL_TRANSPORT_HPP_
