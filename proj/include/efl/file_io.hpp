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

#ifndef EFL_FILE_IO_HPP_
#define EFL_FILE_IO_HPP_

#include <filesystem>

#include "efl/bytes.hpp"

namespace efl {

// Error(kIo) when the file cannot be read.
Bytes ReadFileBytes(const std::filesystem::path& path);

// Writes to a sibling temporary file, syncs, then renames over `path`.
void WriteFileAtomic(const std::filesystem::path& path, ByteView contents);

}  // namespace efl

#endif  // EFL_FILE_IO_HPP_
