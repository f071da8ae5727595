// Copyright 2026 The latent_gait Authors.
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

#ifndef LATENT_GAIT_ERROR_H_
#define LATENT_GAIT_ERROR_H_

#include <stdexcept>
#include <string>

namespace latent_gait {

enum class ErrorCode {
  kUnreachable,
  kDegenerateSupport,
  kInvalidParams,
  kCommandOutOfBounds,
  kShapeMismatch,
  kNonFiniteLoss,
  kDatasetTooShort,
  kVersionMismatch,
  kCorruptFile,
  kModelMissing,
  kBufferUnderflow,
  kInsufficientData,
  kDivergedState,
  kNoPeriodicDimension,
  kEmptySample,
  kMalformedFrame,
  kPortInUse,
  kIo,
};

const char* ErrorCodeName(ErrorCode code);

// Every domain failure in the library is reported with this type so that
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace latent_gait

#endif  // LATENT_GAIT_ERROR_H_
