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

#include <doctest.h>

#include "curette/hash.hpp"
#include "../oracle/frozen_values.hpp"

using curette::hash64;

TEST_CASE("hash64 matches the independent Python derivation") {
  CHECK(hash64({std::uint64_t{0}}) == frozen::kHashOfZero);
  CHECK(hash64({frozen::kCoinSeed, std::string_view("coin"), std::string_view("s00000")}) == frozen::kHashCoinS00000);
}

TEST_CASE("hash64 separates parts by length prefix") {
  CHECK(hash64({std::string_view("ab"), std::string_view("c")}) != hash64({std::string_view("a"), std::string_view("bc")}));
  CHECK(hash64({std::uint64_t{1}, std::string_view("x")}) != hash64({std::uint64_t{2}, std::string_view("x")}));
}

TEST_CASE("unit_interval stays in [0, 1)") {
  CHECK(curette::unit_interval(0) == 0.0);
  CHECK(curette::unit_interval(~std::uint64_t{0}) < 1.0);
  CHECK(curette::unit_interval(std::uint64_t{1} << 63) == doctest::Approx(0.5));
}

TEST_CASE("sha256_hex and hex64") {
  CHECK(curette::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(curette::hex64(0xabcULL) == "0000000000000abc");
}
