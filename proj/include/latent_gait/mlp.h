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

#ifndef LATENT_GAIT_MLP_H_
#define LATENT_GAIT_MLP_H_

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

namespace latent_gait {

// Fully connected network with ELU hidden activations and a linear output
// layer. Batches are stored column-wise (one sample per column).
class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> pre;  // pre-activation per layer
    std::vector<Eigen::MatrixXd> act;  // act[0] is the input
  };

  Mlp() = default;
  // sizes = {input, hidden..., output}
  explicit Mlp(std::vector<int> sizes);

  // Uniform fan-in scaling U(-1/sqrt(fan_in), 1/sqrt(fan_in)); zero biases.
  void Initialize(std::mt19937_64& rng);
  void SetZero();
  void ZeroOutputLayer();

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::int64_t ParameterCount() const;

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  Eigen::MatrixXd Forward(const Eigen::Ref<const Eigen::MatrixXd>& x, Cache* cache = nullptr) const;

  // Accumulates parameter gradients into `grad` (same shapes as this net)
  // given dL/d(output). Writes dL/d(input) when grad_input is non-null.
  void Backward(const Cache& cache, const Eigen::MatrixXd& grad_output, Mlp* grad,
                Eigen::MatrixXd* grad_input) const;

  // Parameters in declared order: per layer, weight (column-major) then bias.
  void AppendParameters(std::vector<double>* out) const;
  void AppendParameters(Eigen::VectorXd* out, Eigen::Index* offset) const;
  void LoadParameters(const double* data, Eigen::Index* offset);

  // Elementwise helpers shared with the reference implementation.
  static double Elu(double x) { return x > 0.0 ? x : std::expm1(x); }
  static double EluGrad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

}  // namespace latent_gait

#endif  // LATENT_GAIT_MLP_H_
