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

#ifndef EFL_BYTES_HPP_
#define EFL_BYTES_HPP_

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "efl/error.hpp"

namespace efl {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView AsBytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}
inline Bytes ToBytes(std::string_view s) {
  auto v = AsBytes(s);
  return {v.begin(), v.end()};
}
inline std::string ToString(ByteView b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

std::string HexEncode(ByteView bytes);
// Throws Error(kDecode) on odd length or non-hex characters.
Bytes HexDecode(std::string_view hex);

template <std::size_t N>
std::array<std::uint8_t, N> HexDecodeFixed(std::string_view hex) {
  Bytes raw = HexDecode(hex);
  if (raw.size() != N) {
    throw Error(ErrorCode::kDecode, "expected " + std::to_string(N) +
                                        " hex-encoded bytes, got " +
                                        std::to_string(raw.size()));
  }
  std::array<std::uint8_t, N> out{};
  std::copy(raw.begin(), raw.end(), out.begin());
  return out;
}

std::string Base64Encode(ByteView bytes);
Bytes Base64Decode(std::string_view text);

// True when `needle` occurs anywhere in `haystack`.
bool Contains(ByteView haystack, ByteView needle);

// Big-endian serializer used by every wire and file format in the project.
class ByteWriter {
 public:
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U16(std::uint16_t v);
  void U32(std::uint32_t v);
  void U64(std::uint64_t v);
  void F64(double v);
  void Raw(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }

  const Bytes& bytes() const& { return out_; }
  Bytes&& Take() && { return std::move(out_); }

 private:
  Bytes out_;
};

// Throws Error(kDecode) when reading past the end.
class ByteReader {
 public:
  explicit ByteReader(ByteView in) : in_(in) {}

  std::uint8_t U8();
  std::uint16_t U16();
  std::uint32_t U32();
  std::uint64_t U64();
  double F64();
  ByteView Raw(std::size_t n);
  template <std::size_t N>
  std::array<std::uint8_t, N> Fixed() {
    auto v = Raw(N);
    std::array<std::uint8_t, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }
  ByteView Rest() { return Raw(remaining()); }

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  ByteView in_;
  std::size_t pos_ = 0;
};

}  // namespace efl

#endif  // EFL_BYTES_HPP_
