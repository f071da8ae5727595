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

#include "latent_gait/error.h"

namespace latent_gait {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnreachable:
      return "Unreachable";
    case ErrorCode::kDegenerateSupport:
      return "DegenerateSupport";
    case ErrorCode::kInvalidParams:
      return "InvalidParams";
    case ErrorCode::kCommandOutOfBounds:
      return "CommandOutOfBounds";
    case ErrorCode::kShapeMismatch:
      return "ShapeMismatch";
    case ErrorCode::kNonFiniteLoss:
      return "NonFiniteLoss";
    case ErrorCode::kDatasetTooShort:
      return "DatasetTooShort";
    case ErrorCode::kVersionMismatch:
      return "VersionMismatch";
    case ErrorCode::kCorruptFile:
      return "CorruptFile";
    case ErrorCode::kModelMissing:
      return "ModelMissing";
    case ErrorCode::kBufferUnderflow:
      return "BufferUnderflow";
    case ErrorCode::kInsufficientData:
      return "InsufficientData";
    case ErrorCode::kDivergedState:
      return "DivergedState";
    case ErrorCode::kNoPeriodicDimension:
      return "NoPeriodicDimension";
    case ErrorCode::kEmptySample:
      return "EmptySample";
    case ErrorCode::kMalformedFrame:
      return "MalformedFrame";
    case ErrorCode::kPortInUse:
      return "PortInUse";
    case ErrorCode::kIo:
      return "Io";
  }
  return "Unknown";
}

}  // namespace latent_gait
