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

#include "latent_gait/reference_kernels.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "latent_gait/error.h"

namespace latent_gait {
namespace {

// Accumulates parameter gradients for one sample and returns dL/dx.
Eigen::VectorXd ReferenceBackward(const Mlp& net, const std::vector<Eigen::VectorXd>& pre,
                                  const std::vector<Eigen::VectorXd>& act,
                                  const Eigen::VectorXd& grad_out, Mlp* grad) {
  Eigen::VectorXd delta = grad_out;
  for (int l = net.num_layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& w = net.weights()[l];
    Eigen::MatrixXd& gw = grad->weights()[l];
    Eigen::VectorXd& gb = grad->biases()[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      gb(i) += delta(i);
      for (Eigen::Index j = 0; j < w.cols(); ++j) gw(i, j) += delta(i) * act[l](j);
    }
    Eigen::VectorXd back = Eigen::VectorXd::Zero(w.cols());
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < w.rows(); ++i) s += w(i, j) * delta(i);
      back(j) = l > 0 ? s * Mlp::EluGrad(pre[l - 1](j)) : s;
    }
    delta = std::move(back);
  }
  return delta;
}

}  // namespace

Eigen::VectorXd ReferenceForward(const Mlp& net, const Eigen::VectorXd& x,
                                 std::vector<Eigen::VectorXd>* pre,
                                 std::vector<Eigen::VectorXd>* act) {
  if (x.size() != net.input_size()) {
    throw Error(ErrorCode::kShapeMismatch, "MLP input has wrong size");
  }
  if (pre != nullptr) pre->clear();
  if (act != nullptr) act->assign(1, x);
  Eigen::VectorXd h = x;
  for (int l = 0; l < net.num_layers(); ++l) {
    const Eigen::MatrixXd& w = net.weights()[l];
    Eigen::VectorXd p(w.rows());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      double s = net.biases()[l](i);
      for (Eigen::Index j = 0; j < w.cols(); ++j) s += w(i, j) * h(j);
      p(i) = s;
    }
    if (pre != nullptr) pre->push_back(p);
    if (l + 1 < net.num_layers()) {
      for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = Mlp::Elu(p(i));
    }
    h = std::move(p);
    if (act != nullptr) act->push_back(h);
  }
  return h;
}

LossTerms ReferenceLossAndGradient(const VaeModel& model, const TrainingBatch& batch,
                                   const Eigen::MatrixXd& noise, VaeGradient* grad) {
  const VaeConfig& cfg = model.config;
  const int nb = batch.size();
  const int latent = cfg.latent;
  if (nb == 0 || noise.rows() != latent || noise.cols() != nb || batch.targets.cols() != nb ||
      batch.contacts.cols() != nb || batch.actions.cols() != nb) {
    throw Error(ErrorCode::kShapeMismatch, "training batch does not match config");
  }
  const bool mean = cfg.reduction == LossReduction::kMean;
  const double n_out = mean ? cfg.OutputSize() : 1.0;
  const double n_contact = mean ? cfg.ContactSize() : 1.0;
  if (grad != nullptr) *grad = VaeGradient::ZerosLike(model);

  LossTerms loss;
  for (int b = 0; b < nb; ++b) {
    std::vector<Eigen::VectorXd> enc_pre, enc_act, dec_pre, dec_act, pp_pre, pp_act;
    const Eigen::VectorXd enc =
        ReferenceForward(model.encoder, batch.windows.col(b), &enc_pre, &enc_act);
    Eigen::VectorXd mu(latent), lv(latent), sd(latent), z(latent);
    for (int i = 0; i < latent; ++i) {
      mu(i) = enc(i);
      lv(i) = enc(latent + i);
      sd(i) = std::exp(0.5 * lv(i));
      z(i) = mu(i) + sd(i) * noise(i, b);
    }
    Eigen::VectorXd dec_in(latent + 3);
    for (int i = 0; i < latent; ++i) dec_in(i) = z(i);
    for (int i = 0; i < 3; ++i) dec_in(latent + i) = batch.actions(i, b);
    const Eigen::VectorXd y = ReferenceForward(model.decoder, dec_in, &dec_pre, &dec_act);
    const Eigen::VectorXd logit = ReferenceForward(model.predictor, z, &pp_pre, &pp_act);

    double mse = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double d = y(i) - batch.targets(i, b);
      mse += d * d;
    }
    double kl = 0.0;
    for (int i = 0; i < latent; ++i) kl += 0.5 * (mu(i) * mu(i) + std::exp(lv(i)) - 1.0 - lv(i));
    double bce = 0.0;
    for (Eigen::Index i = 0; i < logit.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-logit(i)));
      const double s = batch.contacts(i, b);
      bce -= s * std::log(std::max(p, 1e-300)) + (1.0 - s) * std::log(std::max(1.0 - p, 1e-300));
    }
    loss.mse += mse / n_out / nb;
    loss.kl += kl / nb;
    loss.bce += bce / n_contact / nb;

    if (grad == nullptr) continue;
    Eigen::VectorXd dy(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      dy(i) = 2.0 * (y(i) - batch.targets(i, b)) / n_out / nb;
    }
    Eigen::VectorXd dl(logit.size());
    for (Eigen::Index i = 0; i < logit.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-logit(i)));
      dl(i) = cfg.gamma * (p - batch.contacts(i, b)) / n_contact / nb;
    }
    const Eigen::VectorXd d_dec_in =
        ReferenceBackward(model.decoder, dec_pre, dec_act, dy, &grad->decoder);
    const Eigen::VectorXd d_pp =
        ReferenceBackward(model.predictor, pp_pre, pp_act, dl, &grad->predictor);
    Eigen::VectorXd d_enc(2 * latent);
    for (int i = 0; i < latent; ++i) {
      double dz = d_dec_in(i);
      if (!cfg.detach_contact_gradients) dz += d_pp(i);
      d_enc(i) = dz + cfg.beta * mu(i) / nb;
      d_enc(latent + i) =
          dz * noise(i, b) * 0.5 * sd(i) + cfg.beta * 0.5 * (std::exp(lv(i)) - 1.0) / nb;
    }
    ReferenceBackward(model.encoder, enc_pre, enc_act, d_enc, &grad->encoder);
  }
  loss.total = loss.mse + cfg.beta * loss.kl + cfg.gamma * loss.bce;
  return loss;
}

}  // namespace latent_gait
