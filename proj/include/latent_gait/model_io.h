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

#ifndef LATENT_GAIT_MODEL_IO_H_
#define LATENT_GAIT_MODEL_IO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "latent_gait/vae.h"

namespace latent_gait {

// Layout, all integers and floats little-endian:
//   8 bytes   magic "LGVAEMDL"
//   u32       format version
//   u64, ...  length-prefixed JSON block {"config", "step", "robot_hash"}
//   u32, ...  D, then D f64 means, then D f64 standard deviations
//   u64, ...  parameter count, then f64 parameters (encoder, decoder,
//             predictor; per layer weight column-major then bias)
//   u32       crc32 of every preceding byte
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<unsigned char> SerializeModel(const VaeModel& model,
                                          const std::string& robot_hash = "");
// Throws Error(kVersionMismatch) or Error(kCorruptFile).
VaeModel DeserializeModel(const std::vector<unsigned char>& bytes,
                          std::string* robot_hash = nullptr);

void SaveModel(const VaeModel& model, const std::string& path, const std::string& robot_hash = "");
// Throws Error(kModelMissing) when the file cannot be opened.
VaeModel LoadModel(const std::string& path, std::string* robot_hash = nullptr);

}  // namespace latent_gait

#endif  // LATENT_GAIT_MODEL_IO_H_
