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

#ifndef LATENT_GAIT_TRAINER_H_
#define LATENT_GAIT_TRAINER_H_

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include "latent_gait/execution.h"
#include "latent_gait/gait_synthesizer.h"
#include "latent_gait/vae.h"

namespace latent_gait {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(Eigen::Index size, AdamOptions options = {});

  // In-place update of `params` with gradient `grad`.
  void Step(Eigen::VectorXd* params, const Eigen::VectorXd& grad, double learning_rate);

  std::int64_t t() const { return t_; }

 private:
  AdamOptions options_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::int64_t t_ = 0;
};

// A window ending at tick k of trajectory `traj`.
struct WindowIndex {
  int traj = 0;
  int k = 0;
};

// Every k with r(N-1) ticks of history and max(M, J-1) ticks of future.
std::vector<WindowIndex> ValidWindows(const Dataset& dataset, const VaeConfig& config,
                                      const std::vector<int>& trajectories);

// Standardized encoder window for tick k, oldest state first.
Eigen::VectorXd BuildWindow(const Eigen::MatrixXd& states, int k, const VaeConfig& config,
                            const NormalizationStats& stats);

TrainingBatch BuildBatch(const Dataset& dataset, const VaeConfig& config,
                         const NormalizationStats& stats, const std::vector<WindowIndex>& windows);

// One optimizer step. Throws Error(kNonFiniteLoss) before touching the model
// if the loss or any gradient entry is not finite.
LossTerms TrainStep(VaeModel* model, const TrainingBatch& batch, const Eigen::MatrixXd& noise,
                    AdamOptimizer* optimizer, Execution execution = Execution::kParallel);

struct CurveRow {
  std::int64_t step = 0;
  LossTerms loss;  // averaged over the logging interval
};

struct TrainOptions {
  int holdout_trajectories = 2;
  int log_every = 100;
  Execution execution = Execution::kParallel;
  std::function<void(const CurveRow&)> on_log;
};

struct TrainResult {
  VaeModel model;
  std::vector<CurveRow> curve;
  std::vector<double> step_totals;
  std::vector<int> train_trajectories;
  std::vector<int> holdout_trajectories;
};

// Normalization stats come from the training trajectories. Throws
// Error(kDatasetTooShort) when no valid window exists.
TrainResult Train(const Dataset& dataset, const VaeConfig& config,
                  const TrainOptions& options = {});

void WriteCurveCsv(const std::vector<CurveRow>& curve, std::ostream& out);

struct EvalMetrics {
  int windows = 0;
  double contact_accuracy = 0.0;          // all 4*J outputs, threshold 0.5
  double current_contact_accuracy = 0.0;  // block 0 only
  double reconstruction_mse = 0.0;        // all (M+1)*D outputs, from mu
  double first_block_mse_mean = 0.0;
  double first_block_mse_std = 0.0;
};

// Deterministic evaluation through the posterior mean.
EvalMetrics Evaluate(const VaeModel& model, const Dataset& dataset,
                     const std::vector<int>& trajectories);

// Max relative error |a - n| / max(1e-6, |a| + |n|) between analytic and
// central-difference gradients over every parameter. With detached contact
// gradients the encoder entries are differenced on the loss without BCE.
double GradientCheck(const VaeModel& model, const TrainingBatch& batch,
                     const Eigen::MatrixXd& noise, double step = 1e-5);

}  // namespace latent_gait

#endif  // LATENT_GAIT_TRAINER_H_
