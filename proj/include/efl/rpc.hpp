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

#ifndef EFL_RPC_HPP_
#define EFL_RPC_HPP_

#include <cstdint>

#include "efl/attestation.hpp"
#include "efl/canonical.hpp"
#include "efl/error.hpp"

// Request/response messages carried inside SecureChannel frames:
// u8 type | canonical JSON body.
namespace efl::rpc {

enum class Type : std::uint8_t {
  kOk = 0,
  kFailed = 1,
  kUploadPolicy = 10,
  kGenerateSecrets = 11,
  kRequestSecrets = 12,
  kCounterCreate = 20,
  kCounterIncrement = 21,
  kCounterRead = 22,
  kJoin = 30,
  kModelBroadcast = 31,
  kUpdateSubmit = 32,
  kRoundCommit = 33,
  kSessionEnd = 34,
};

struct Message {
  Type type = Type::kOk;
  Json body;
};

Bytes Encode(Type type, const Json& body);
// Error(kDecode) for unknown types or malformed bodies.
Message Decode(ByteView payload);

// Body of a kFailed reply: {"error": <code name>, "message": ..., extra...}.
Json FailureBody(const Error& error, Json extra = Json::object());

// Error raised on the caller's side for a kFailed reply, keeping the body.
class RemoteError : public Error {
 public:
  RemoteError(ErrorCode code, const std::string& message, Json body)
      : Error(code, message), body_(std::move(body)) {}
  const Json& body() const { return body_; }

 private:
  Json body_;
};

// Sends a request and waits for a kOk or kFailed reply.
Json Call(attest::SecureChannel& channel, Type type, const Json& body,
          net::Millis timeout = net::Millis(30'000));

}  // namespace efl::rpc

#endif  // EFL_RPC_HPP_
