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

#ifndef EFL_CANONICAL_HPP_
#define EFL_CANONICAL_HPP_

#include <string>

#include "efl/bytes.hpp"
#include "efl/crypto.hpp"
#include "json.hpp"

namespace efl {

using Json = nlohmann::json;

// Deterministic text encoding shared by policies, protocol payloads and audit
// entries: UTF-8 JSON, object keys in byte-lexicographic order, no
// insignificant whitespace, shortest round-trip form for doubles.
std::string CanonicalEncode(const Json& value);

// Parses text and throws Error(kDecode) on malformed input.
Json ParseJson(std::string_view text);

crypto::Digest CanonicalHash(const Json& value);

// Accessors that throw Error(kDecode) naming the missing or mistyped field.
const Json& RequireField(const Json& object, const char* key);
std::string RequireString(const Json& object, const char* key);
std::uint64_t RequireUnsigned(const Json& object, const char* key);
double RequireNumber(const Json& object, const char* key);
bool RequireBool(const Json& object, const char* key);
Bytes RequireHex(const Json& object, const char* key);
Bytes RequireBase64(const Json& object, const char* key);

}  // namespace efl

#endif  // EFL_CANONICAL_HPP_
