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

#include "efl/canonical.hpp"

#include "efl/error.hpp"

namespace efl {

std::string CanonicalEncode(const Json& value) {
  try {
    return value.dump(-1, ' ', false, Json::error_handler_t::strict);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidInput,
                std::string("value has no canonical encoding: ") + e.what());
  }
}

Json ParseJson(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kDecode, std::string("malformed JSON: ") + e.what());
  }
}

crypto::Digest CanonicalHash(const Json& value) {
  return crypto::Sha256(AsBytes(CanonicalEncode(value)));
}

const Json& RequireField(const Json& object, const char* key) {
  if (!object.is_object()) {
    throw Error(ErrorCode::kDecode, "expected an object holding '" +
                                        std::string(key) + "'");
  }
  auto it = object.find(key);
  if (it == object.end()) {
    throw Error(ErrorCode::kDecode, "missing field '" + std::string(key) + "'");
  }
  return *it;
}

namespace {

[[noreturn]] void WrongType(const char* key, const char* expected) {
  throw Error(ErrorCode::kDecode,
              "field '" + std::string(key) + "' must be " + expected);
}

}  // namespace

std::string RequireString(const Json& object, const char* key) {
  const Json& v = RequireField(object, key);
  if (!v.is_string()) WrongType(key, "a string");
  return v.get<std::string>();
}

std::uint64_t RequireUnsigned(const Json& object, const char* key) {
  const Json& v = RequireField(object, key);
  if (!v.is_number_unsigned()) WrongType(key, "a non-negative integer");
  return v.get<std::uint64_t>();
}

double RequireNumber(const Json& object, const char* key) {
  const Json& v = RequireField(object, key);
  if (!v.is_number()) WrongType(key, "a number");
  return v.get<double>();
}

bool RequireBool(const Json& object, const char* key) {
  const Json& v = RequireField(object, key);
  if (!v.is_boolean()) WrongType(key, "a boolean");
  return v.get<bool>();
}

Bytes RequireHex(const Json& object, const char* key) {
  return HexDecode(RequireString(object, key));
}

Bytes RequireBase64(const Json& object, const char* key) {
  return Base64Decode(RequireString(object, key));
}

}  // namespace efl
