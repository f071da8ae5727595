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

#include "latent_gait/mlp.h"

#include <cmath>

#include "latent_gait/error.h"

namespace latent_gait {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) {
    throw Error(ErrorCode::kInvalidParams, "an MLP needs input and output sizes");
  }
  for (int s : sizes_) {
    if (s < 1) throw Error(ErrorCode::kInvalidParams, "layer widths must be >= 1");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weights_.emplace_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
    biases_.emplace_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
  }
}

void Mlp::Initialize(std::mt19937_64& rng) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(weights_[l].cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Column-major fill keeps the draw order tied to the file layout.
    for (Eigen::Index i = 0; i < weights_[l].size(); ++i) {
      weights_[l].data()[i] = dist(rng);
    }
    biases_[l].setZero();
  }
}

void Mlp::SetZero() {
  for (auto& w : weights_) w.setZero();
  for (auto& b : biases_) b.setZero();
}

void Mlp::ZeroOutputLayer() {
  weights_.back().setZero();
  biases_.back().setZero();
}

std::int64_t Mlp::ParameterCount() const {
  std::int64_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += weights_[l].size() + biases_[l].size();
  }
  return n;
}

Eigen::MatrixXd Mlp::Forward(const Eigen::Ref<const Eigen::MatrixXd>& x, Cache* cache) const {
  if (x.rows() != input_size()) {
    throw Error(ErrorCode::kShapeMismatch, "MLP input has wrong size");
  }
  if (cache != nullptr) {
    cache->pre.resize(weights_.size());
    cache->act.resize(weights_.size() + 1);
    cache->act[0] = x;
  }
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd pre = weights_[l] * h;
    pre.colwise() += biases_[l];
    const bool last = l + 1 == weights_.size();
    if (last) {
      h = pre;
    } else {
      h = pre.unaryExpr([](double v) { return Elu(v); });
    }
    if (cache != nullptr) {
      cache->pre[l] = std::move(pre);
      cache->act[l + 1] = h;
    }
  }
  return h;
}

void Mlp::Backward(const Cache& cache, const Eigen::MatrixXd& grad_output, Mlp* grad,
                   Eigen::MatrixXd* grad_input) const {
  Eigen::MatrixXd delta = grad_output;
  for (int l = num_layers() - 1; l >= 0; --l) {
    grad->weights_[l].noalias() += delta * cache.act[l].transpose();
    grad->biases_[l] += delta.rowwise().sum();
    if (l == 0 && grad_input == nullptr) break;
    Eigen::MatrixXd back = weights_[l].transpose() * delta;
    if (l > 0) {
      back.array() *= cache.pre[l - 1].unaryExpr([](double v) { return EluGrad(v); }).array();
      delta = std::move(back);
    } else {
      *grad_input = std::move(back);
    }
  }
}

void Mlp::AppendParameters(std::vector<double>* out) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out->insert(out->end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
    out->insert(out->end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
  }
}

void Mlp::AppendParameters(Eigen::VectorXd* out, Eigen::Index* offset) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out->segment(*offset, weights_[l].size()) =
        Eigen::Map<const Eigen::VectorXd>(weights_[l].data(), weights_[l].size());
    *offset += weights_[l].size();
    out->segment(*offset, biases_[l].size()) = biases_[l];
    *offset += biases_[l].size();
  }
}

void Mlp::LoadParameters(const double* data, Eigen::Index* offset) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] =
        Eigen::Map<const Eigen::MatrixXd>(data + *offset, weights_[l].rows(), weights_[l].cols());
    *offset += weights_[l].size();
    biases_[l] = Eigen::Map<const Eigen::VectorXd>(data + *offset, biases_[l].size());
    *offset += biases_[l].size();
  }
}

}  // namespace latent_gait
