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

#ifndef LATENT_GAIT_VAE_H_
#define LATENT_GAIT_VAE_H_

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "latent_gait/execution.h"
#include "latent_gait/mlp.h"
#include "latent_gait/quadruped_model.h"

namespace latent_gait {

// How MSE and BCE are reduced over output dimensions. KL is always summed
// over latent dimensions; every term is averaged over the batch.
enum class LossReduction { kMean, kSum };

struct VaeConfig {
  int state_dim = kStateDim;  // D
  int window = 20;            // N states in the encoder input
  double control_frequency = 100.0;
  double encoder_frequency = 50.0;
  int future = 9;         // M predicted states after the current one
  int contact_steps = 3;  // J contact blocks
  int latent = 16;
  std::vector<int> encoder_hidden = {128, 128};
  std::vector<int> decoder_hidden = {128, 128};
  std::vector<int> predictor_hidden = {128, 128};
  double beta = 1.0;
  double gamma = 0.5;
  double learning_rate = 1e-3;
  int batch_size = 64;
  std::int64_t steps = 50000;
  bool detach_contact_gradients = false;
  LossReduction reduction = LossReduction::kSum;
  std::uint64_t seed = 1;

  // r = f_c / f_enc. Throws Error(kInvalidParams) if not a positive integer.
  int Ratio() const;
  int HistoryTicks() const { return Ratio() * (window - 1); }
  int InputSize() const { return window * state_dim; }
  int OutputSize() const { return (future + 1) * state_dim; }
  int ContactSize() const { return kNumLegs * contact_steps; }
  void Validate() const;

  nlohmann::json ToJson() const;
  static VaeConfig FromJson(const nlohmann::json& j);

  // 100 Hz control, 0.4 s history at 50 Hz, 16 latents, widths 128,
  // beta 5.
  static VaeConfig DeskProfile();
  // 400 Hz control, N = 80 at 200 Hz, 125 latents, widths 256, 1e6 steps.
  static VaeConfig PaperProfile();
};

struct VaeModel {
  VaeConfig config;
  NormalizationStats stats;
  Mlp encoder;    // N*D -> 2*latent (mu, logvar)
  Mlp decoder;    // latent + 3 -> (M+1)*D
  Mlp predictor;  // latent -> 4*J logits
  std::int64_t step = 0;

  // Seeded from config.seed.
  static VaeModel Create(const VaeConfig& config, NormalizationStats stats);

  std::int64_t ParameterCount() const;
  Eigen::VectorXd Parameters() const;
  void SetParameters(const Eigen::VectorXd& params);
};

struct Posterior {
  Eigen::VectorXd mu;
  Eigen::VectorXd logvar;
};

// Inputs are standardized. Throw Error(kShapeMismatch) on size errors.
Posterior Encode(const VaeModel& model, const Eigen::Ref<const Eigen::VectorXd>& window);
Eigen::VectorXd Reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar,
                               const Eigen::VectorXd& noise);
Eigen::VectorXd Decode(const VaeModel& model, const Eigen::Ref<const Eigen::VectorXd>& z,
                       const Eigen::Ref<const Eigen::VectorXd>& action);
// Sigmoid probabilities; block j holds the four feet at step k + j.
Eigen::VectorXd PredictContacts(const VaeModel& model, const Eigen::Ref<const Eigen::VectorXd>& z);
// KL(N(mu, exp(logvar)) || N(0, I)), summed over dimensions.
double KlDivergence(const Eigen::Ref<const Eigen::VectorXd>& mu,
                    const Eigen::Ref<const Eigen::VectorXd>& logvar);

// One sample per column.
struct TrainingBatch {
  Eigen::MatrixXd windows;   // N*D x B
  Eigen::MatrixXd actions;   // 3 x B
  Eigen::MatrixXd targets;   // (M+1)*D x B
  Eigen::MatrixXd contacts;  // 4*J x B, 0/1

  int size() const { return static_cast<int>(windows.cols()); }
};

struct LossTerms {
  double mse = 0.0;
  double kl = 0.0;
  double bce = 0.0;
  double total = 0.0;
};

// Gradient buffers shaped like the model's networks.
struct VaeGradient {
  Mlp encoder;
  Mlp decoder;
  Mlp predictor;

  static VaeGradient ZerosLike(const VaeModel& model);
  Eigen::VectorXd Flatten() const;
  void Add(const VaeGradient& other);
};

// total = mean_b[MSE + beta * KL] + gamma * mean_b[BCE], with MSE and BCE
// reduced over outputs per config.reduction. `noise` is latent x B. When
// `grad` is non-null it receives dL/dparams. The batch is cut into a fixed
// number of chunks whose gradients are summed in order, so the result is the
// same for any thread count.
LossTerms LossAndGradient(const VaeModel& model, const TrainingBatch& batch,
                          const Eigen::MatrixXd& noise, VaeGradient* grad,
                          Execution execution = Execution::kParallel);

inline constexpr int kGradientChunks = 8;

}  // namespace latent_gait

#endif  // LATENT_GAIT_VAE_H_
