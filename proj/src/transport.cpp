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

#include "efl/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>

#include "efl/error.hpp"

namespace efl::net {

namespace {

struct PipeState {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> queue[2];
  bool closed[2] = {false, false};
};

class PipeEnd : public Transport {
 public:
  PipeEnd(std::shared_ptr<PipeState> state, int side)
      : state_(std::move(state)), side_(side) {}
  ~PipeEnd() override { Close(); }

  void Send(ByteView frame) override {
    std::lock_guard lock(state_->mu);
    if (state_->closed[side_] || state_->closed[1 - side_]) {
      throw Error(ErrorCode::kChannelClosed, "pipe is closed");
    }
    state_->queue[1 - side_].emplace_back(frame.begin(), frame.end());
    state_->cv.notify_all();
  }

  Bytes Receive(Millis timeout) override {
    std::unique_lock lock(state_->mu);
    auto& q = state_->queue[side_];
    bool ready = state_->cv.wait_for(lock, timeout, [&] {
      return !q.empty() || state_->closed[0] || state_->closed[1];
    });
    if (!q.empty() && !state_->closed[side_]) {
      Bytes out = std::move(q.front());
      q.pop_front();
      return out;
    }
    if (!ready) throw Error(ErrorCode::kTimeout, "no frame before deadline");
    throw Error(ErrorCode::kChannelClosed, "pipe is closed");
  }

  void Close() override {
    std::lock_guard lock(state_->mu);
    state_->closed[side_] = true;
    state_->cv.notify_all();
  }

 private:
  std::shared_ptr<PipeState> state_;
  int side_;
};

class TapTransport : public Transport {
 public:
  TapTransport(std::unique_ptr<Transport> inner,
               std::shared_ptr<WireCapture> capture, std::string link)
      : inner_(std::move(inner)),
        capture_(std::move(capture)),
        link_(std::move(link)) {}

  void Send(ByteView frame) override {
    capture_->Record(link_ + ">", frame);
    inner_->Send(frame);
  }
  Bytes Receive(Millis timeout) override {
    Bytes frame = inner_->Receive(timeout);
    capture_->Record(link_ + "<", frame);
    return frame;
  }
  void Close() override { inner_->Close(); }

 private:
  std::unique_ptr<Transport> inner_;
  std::shared_ptr<WireCapture> capture_;
  std::string link_;
};

class FilterTransport : public Transport {
 public:
  FilterTransport(std::unique_ptr<Transport> inner, FrameFilter filter)
      : inner_(std::move(inner)), filter_(std::move(filter)) {}

  void Send(ByteView frame) override {
    for (const Bytes& out : filter_(Bytes(frame.begin(), frame.end()))) {
      inner_->Send(out);
    }
  }
  Bytes Receive(Millis timeout) override { return inner_->Receive(timeout); }
  void Close() override { inner_->Close(); }

 private:
  std::unique_ptr<Transport> inner_;
  FrameFilter filter_;
};

class SocketTransport : public Transport {
 public:
  explicit SocketTransport(int fd) : fd_(fd) {}
  ~SocketTransport() override { Close(); }

  void Send(ByteView frame) override {
    // A frame whose prefix lies would desynchronize the stream for good.
    if (frame.size() < 4 ||
        ((std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
         (std::uint32_t{frame[2]} << 8) | frame[3]) != frame.size() - 4) {
      throw Error(ErrorCode::kInvalidInput, "frame length prefix does not match its size");
    }
    std::lock_guard lock(send_mu_);
    std::size_t sent = 0;
    while (sent < frame.size()) {
      ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent,
                         MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        throw Error(ErrorCode::kChannelClosed,
                    std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  Bytes Receive(Millis timeout) override {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    std::uint8_t header[4];
    if (!ReadExact(header, 4, deadline, /*first=*/true)) {
      throw Error(ErrorCode::kChannelClosed, "peer closed the connection");
    }
    std::uint32_t len = (std::uint32_t{header[0]} << 24) |
                        (std::uint32_t{header[1]} << 16) |
                        (std::uint32_t{header[2]} << 8) | header[3];
    if (len > kMaxFrameSize) {
      throw Error(ErrorCode::kDecode, "frame exceeds maximum size");
    }
    Bytes frame(4 + static_cast<std::size_t>(len));
    std::memcpy(frame.data(), header, 4);
    if (!ReadExact(frame.data() + 4, len, deadline, /*first=*/false)) {
      throw Error(ErrorCode::kDecode, "stream ended inside a frame");
    }
    return frame;
  }

  void Close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  // Returns false on EOF. EOF after a partial read of a non-first chunk is
  // reported as false as well; callers translate it.
  bool ReadExact(std::uint8_t* out, std::size_t n,
                 std::chrono::steady_clock::time_point deadline, bool first) {
    std::size_t got = 0;
    while (got < n) {
      auto left = std::chrono::duration_cast<Millis>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        throw Error(ErrorCode::kTimeout, "no frame before deadline");
      }
      pollfd pfd{fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc == 0) throw Error(ErrorCode::kTimeout, "no frame before deadline");
      if (rc < 0) throw Error(ErrorCode::kIo, std::strerror(errno));
      ssize_t r = ::recv(fd_, out + got, n - got, 0);
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) {
        if (first && got > 0) {
          throw Error(ErrorCode::kDecode, "stream ended inside a frame");
        }
        return false;
      }
      got += static_cast<std::size_t>(r);
    }
    return true;
  }

  int fd_;
  std::mutex send_mu_;
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> MakePipe() {
  auto state = std::make_shared<PipeState>();
  return {std::make_unique<PipeEnd>(state, 0),
          std::make_unique<PipeEnd>(state, 1)};
}

void WireCapture::Record(const std::string& link, ByteView bytes) {
  std::lock_guard lock(mu_);
  frames_.push_back({link, Bytes(bytes.begin(), bytes.end())});
}

std::vector<WireCapture::Frame> WireCapture::Frames() const {
  std::lock_guard lock(mu_);
  return frames_;
}

Bytes WireCapture::AllBytes() const {
  std::lock_guard lock(mu_);
  Bytes all;
  for (const auto& f : frames_) all.insert(all.end(), f.bytes.begin(), f.bytes.end());
  return all;
}

std::size_t WireCapture::size() const {
  std::lock_guard lock(mu_);
  return frames_.size();
}

std::unique_ptr<Transport> Tap(std::unique_ptr<Transport> inner,
                               std::shared_ptr<WireCapture> capture,
                               std::string link) {
  return std::make_unique<TapTransport>(std::move(inner), std::move(capture),
                                        std::move(link));
}

std::unique_ptr<Transport> Intercept(std::unique_ptr<Transport> inner,
                                     FrameFilter on_send) {
  return std::make_unique<FilterTransport>(std::move(inner),
                                           std::move(on_send));
}

struct InProcListener::State {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::unique_ptr<Transport>> pending;
  bool closed = false;
};

InProcListener::InProcListener() : state_(std::make_shared<State>()) {}
InProcListener::~InProcListener() { Close(); }

std::unique_ptr<Transport> InProcListener::Connect() {
  auto [client, server] = MakePipe();
  std::lock_guard lock(state_->mu);
  if (state_->closed) {
    throw Error(ErrorCode::kChannelClosed, "listener is closed");
  }
  state_->pending.push_back(std::move(server));
  state_->cv.notify_all();
  return std::move(client);
}

std::unique_ptr<Transport> InProcListener::Accept(Millis timeout) {
  std::unique_lock lock(state_->mu);
  state_->cv.wait_for(lock, timeout, [&] {
    return !state_->pending.empty() || state_->closed;
  });
  if (state_->pending.empty()) return nullptr;
  auto t = std::move(state_->pending.front());
  state_->pending.pop_front();
  return t;
}

void InProcListener::Close() {
  std::lock_guard lock(state_->mu);
  state_->closed = true;
  state_->pending.clear();
  state_->cv.notify_all();
}

namespace {

sockaddr_in ResolveV4(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::kIo, "cannot resolve host " + host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw Error(ErrorCode::kIo, std::strerror(errno));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = ResolveV4(host, port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd_, 64) != 0) {
    std::string msg = std::strerror(errno);
    ::close(fd_);
    throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" +
                                    std::to_string(port) + ": " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { Close(); }

std::unique_ptr<Transport> TcpListener::Accept(Millis timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc <= 0) return nullptr;
  int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return nullptr;
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<SocketTransport>(fd);
}

void TcpListener::Close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<Transport> TcpConnect(const std::string& host,
                                      std::uint16_t port, Millis timeout) {
  sockaddr_in addr = ResolveV4(host, port);
  auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw Error(ErrorCode::kIo, std::strerror(errno));
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return std::make_unique<SocketTransport>(fd);
    }
    std::string msg = std::strerror(errno);
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) {
      throw Error(ErrorCode::kIo, "cannot connect to " + host + ":" +
                                      std::to_string(port) + ": " + msg);
    }
    ::usleep(50'000);
  }
}

std::pair<std::string, std::uint16_t> ParseEndpoint(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw Error(ErrorCode::kInvalidInput, "endpoint must be host:port");
  }
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidInput, "bad port in endpoint " + text);
  }
  if (port > 65535) {
    throw Error(ErrorCode::kInvalidInput, "bad port in endpoint " + text);
  }
  return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

}  // namespace efl::net
