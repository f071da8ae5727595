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

#ifndef LATENT_GAIT_DATASET_IO_H_
#define LATENT_GAIT_DATASET_IO_H_

#include <string>

#include "latent_gait/gait_synthesizer.h"

namespace latent_gait {

inline constexpr int kDatasetFormatVersion = 1;

// JSON Lines: one header record, then per trajectory a metadata record
// followed by one record per tick.
void WriteDatasetJsonl(const Dataset& dataset, const std::string& path);
Dataset ReadDatasetJsonl(const std::string& path);

// Flat spreadsheet view: traj, k, phase, x0..x59, s_LF..s_RH, a_x, a_y, a_yaw.
void WriteDatasetCsv(const Dataset& dataset, const std::string& path);

}  // namespace latent_gait

#endif  // LATENT_GAIT_DATASET_IO_H_
