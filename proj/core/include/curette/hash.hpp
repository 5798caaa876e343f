// Copyright 2026 The Curette Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <variant>

namespace curette {

using HashPart = std::variant<std::uint64_t, std::string_view>;

/// Stable 64-bit digest of a sequence of parts.
///
/// Each integer part is fed to SHA-256 as 8 little-endian bytes; each string
/// part as its byte length (8 bytes LE) followed by the bytes. The result is
/// the first 8 digest bytes read little-endian. The encoding is fixed so that
/// seeds and cache keys stay reproducible across platforms and releases.
std::uint64_t hash64(std::initializer_list<HashPart> parts);

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Maps a 64-bit hash onto [0, 1) using its top 53 bits.
inline double unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::string hex64(std::uint64_t value);

}  // namespace curette
