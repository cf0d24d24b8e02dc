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

#include "efl/rpc.hpp"

namespace efl::rpc {
namespace {

bool KnownType(std::uint8_t t) {
  switch (static_cast<Type>(t)) {
    case Type::kOk:
    case Type::kFailed:
    case Type::kUploadPolicy:
    case Type::kGenerateSecrets:
    case Type::kRequestSecrets:
    case Type::kCounterCreate:
    case Type::kCounterIncrement:
    case Type::kCounterRead:
    case Type::kJoin:
    case Type::kModelBroadcast:
    case Type::kUpdateSubmit:
    case Type::kRoundCommit:
    case Type::kSessionEnd:
      return true;
  }
  return false;
}

}  // namespace

Bytes Encode(Type type, const Json& body) {
  std::string text = CanonicalEncode(body);
  Bytes out;
  out.reserve(1 + text.size());
  out.push_back(static_cast<std::uint8_t>(type));
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

Message Decode(ByteView payload) {
  if (payload.empty()) throw Error(ErrorCode::kDecode, "empty message");
  if (!KnownType(payload[0])) {
    throw Error(ErrorCode::kDecode,
                "unknown message type " + std::to_string(payload[0]));
  }
  Message m;
  m.type = static_cast<Type>(payload[0]);
  m.body = ParseJson(ToString(payload.subspan(1)));
  if (!m.body.is_object()) {
    throw Error(ErrorCode::kDecode, "message body must be an object");
  }
  return m;
}

Json FailureBody(const Error& error, Json extra) {
  extra["error"] = std::string(ErrorCodeName(error.code()));
  extra["message"] = error.what();
  return extra;
}

Json Call(attest::SecureChannel& channel, Type type, const Json& body,
          net::Millis timeout) {
  channel.Send(Encode(type, body));
  Message reply = Decode(channel.Receive(timeout));
  if (reply.type == Type::kOk) return std::move(reply.body);
  if (reply.type != Type::kFailed) {
    throw Error(ErrorCode::kDecode, "unexpected reply type");
  }
  std::string name = RequireString(reply.body, "error");
  std::string message = reply.body.value("message", std::string());
  auto code = ErrorCodeFromName(name).value_or(ErrorCode::kRejected);
  if (message.starts_with(name + ": ")) message.erase(0, name.size() + 2);
  throw RemoteError(code, "remote: " + message, std::move(reply.body));
}

}  // namespace efl::rpc
