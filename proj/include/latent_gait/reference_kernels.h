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

#ifndef LATENT_GAIT_REFERENCE_KERNELS_H_
#define LATENT_GAIT_REFERENCE_KERNELS_H_

#include <Eigen/Core>

#include "latent_gait/vae.h"

namespace latent_gait {

// Straight-line serial versions of the batched kernels. One sample at a time,
// explicit loops, no chunking. Used by tests and the benchmark as the ground
// truth for LossAndGradient.
LossTerms ReferenceLossAndGradient(const VaeModel& model, const TrainingBatch& batch,
                                   const Eigen::MatrixXd& noise, VaeGradient* grad);

// Forward pass of one sample through `net` with scalar loops. Fills the
// per-layer pre-activations when `pre` is non-null.
Eigen::VectorXd ReferenceForward(const Mlp& net, const Eigen::VectorXd& x,
                                 std::vector<Eigen::VectorXd>* pre = nullptr,
                                 std::vector<Eigen::VectorXd>* act = nullptr);

}  // namespace latent_gait

#endif  // LATENT_GAIT_REFERENCE_KERNELS_H_
