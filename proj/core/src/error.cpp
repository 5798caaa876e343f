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

#include "curette/error.hpp"

namespace curette {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kDuplicateRecord: return "DuplicateRecord";
    case ErrorCode::kMissingSample: return "MissingSample";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNoSuchEpoch: return "NoSuchEpoch";
    case ErrorCode::kUnknownSample: return "UnknownSample";
    case ErrorCode::kGenerationFailed: return "GenerationFailed";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kBackendError: return "BackendError";
    case ErrorCode::kEmptyCaptionList: return "EmptyCaptionList";
    case ErrorCode::kEmbedderUnavailable: return "EmbedderUnavailable";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kNoReferences: return "NoReferences";
    case ErrorCode::kKeyMismatch: return "KeyMismatch";
    case ErrorCode::kCorruptState: return "CorruptState";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kDuplicateAnnotator: return "DuplicateAnnotator";
    case ErrorCode::kIncompleteRun: return "IncompleteRun";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

BackendError::BackendError(std::string wire_code, const std::string& message)
    : Error(ErrorCode::kBackendError, wire_code + ": " + message),
      wire_code_(std::move(wire_code)),
      message_(message) {}

}  // namespace curette
