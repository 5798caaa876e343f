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

#include <doctest.h>

#include <functional>

#include "curette/error.hpp"

namespace testing_support {

/// Runs `f` and returns the code of the curette::Error it throws.
inline curette::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const curette::Error& e) {
    return e.code();
  }
  FAIL("expected curette::Error");
  return curette::ErrorCode::kInvalidArgument;
}

/// Message of the curette::Error thrown by `f` (empty if none).
inline std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const curette::Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace testing_support
