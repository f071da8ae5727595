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

#ifndef LATENT_GAIT_EXECUTION_H_
#define LATENT_GAIT_EXECUTION_H_

namespace latent_gait {

// Selects the OpenMP kernel or the plain sequential loop. Both produce
// identical results; the serial path is the reference used in tests and
// benchmarks.
enum class Execution { kSerial, kParallel };

}  // namespace latent_gait

#endif  // LATENT_GAIT_EXECUTION_H_
