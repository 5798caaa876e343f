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

#include <stdexcept>
#include <string>
#include <string_view>

namespace curette {

enum class ErrorCode {
  kParseError,
  kSchemaError,
  kEmptyDataset,
  kIoError,
  kDuplicateRecord,
  kMissingSample,
  kNonFiniteLoss,
  kNoSuchEpoch,
  kUnknownSample,
  kGenerationFailed,
  kBackendUnavailable,
  kBackendError,
  kEmptyCaptionList,
  kEmbedderUnavailable,
  kIndexOutOfRange,
  kNoReferences,
  kKeyMismatch,
  kCorruptState,
  kUnknownCategory,
  kDuplicateAnnotator,
  kIncompleteRun,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library is a curette::Error carrying one of
// the codes above; what() is "<CodeName>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

// Backend failures additionally carry the wire-level error code string
// ("timeout", "empty_batch", ...).
class BackendError : public Error {
 public:
  BackendError(std::string wire_code, const std::string& message);

  const std::string& wire_code() const noexcept { return wire_code_; }
  /// The message without the code prefix, as sent on the wire.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string wire_code_;
  std::string message_;
};

}  // namespace curette
