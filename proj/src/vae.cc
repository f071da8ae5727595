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

#include "latent_gait/vae.h"

#include <algorithm>
#include <cmath>
#include <exception>

#include "latent_gait/error.h"

namespace latent_gait {
namespace {

std::vector<int> Sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// -[s log p + (1 - s) log(1 - p)] with p = sigmoid(logit).
double BceWithLogit(double logit, double target) {
  return std::max(logit, 0.0) - target * logit + std::log1p(std::exp(-std::abs(logit)));
}

struct ChunkResult {
  LossTerms sums;  // already scaled by 1/B
  VaeGradient grad;
};

void ChunkLossAndGradient(const VaeModel& model, const TrainingBatch& batch,
                          const Eigen::MatrixXd& noise, Eigen::Index begin, Eigen::Index count,
                          bool want_grad, ChunkResult* out) {
  const VaeConfig& cfg = model.config;
  const int latent = cfg.latent;
  const double inv_batch = 1.0 / batch.size();
  const double mse_scale = cfg.reduction == LossReduction::kMean ? 1.0 / cfg.OutputSize() : 1.0;
  const double bce_scale = cfg.reduction == LossReduction::kMean ? 1.0 / cfg.ContactSize() : 1.0;

  Mlp::Cache enc_cache, dec_cache, pp_cache;
  const Eigen::MatrixXd enc_out =
      model.encoder.Forward(batch.windows.middleCols(begin, count), &enc_cache);
  const Eigen::MatrixXd mu = enc_out.topRows(latent);
  const Eigen::MatrixXd logvar = enc_out.bottomRows(latent);
  const Eigen::MatrixXd sigma = (0.5 * logvar.array()).exp().matrix();
  const Eigen::MatrixXd eps = noise.middleCols(begin, count);
  const Eigen::MatrixXd z = mu + sigma.cwiseProduct(eps);

  Eigen::MatrixXd dec_in(latent + 3, count);
  dec_in.topRows(latent) = z;
  dec_in.bottomRows(3) = batch.actions.middleCols(begin, count);
  const Eigen::MatrixXd recon = model.decoder.Forward(dec_in, &dec_cache);
  const Eigen::MatrixXd logits = model.predictor.Forward(z, &pp_cache);

  const Eigen::MatrixXd diff = recon - batch.targets.middleCols(begin, count);
  const auto targets_s = batch.contacts.middleCols(begin, count);
  double mse = 0.0, kl = 0.0, bce = 0.0;
  for (Eigen::Index b = 0; b < count; ++b) {
    mse += diff.col(b).squaredNorm() * mse_scale;
    double klb = 0.0;
    for (int i = 0; i < latent; ++i) {
      klb += mu(i, b) * mu(i, b) + std::exp(logvar(i, b)) - 1.0 - logvar(i, b);
    }
    kl += 0.5 * klb;
    double bb = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      bb += BceWithLogit(logits(i, b), targets_s(i, b));
    }
    bce += bb * bce_scale;
  }
  out->sums.mse = mse * inv_batch;
  out->sums.kl = kl * inv_batch;
  out->sums.bce = bce * inv_batch;

  if (!want_grad) return;
  const Eigen::MatrixXd d_recon = (2.0 * mse_scale * inv_batch) * diff;
  Eigen::MatrixXd d_logits(logits.rows(), count);
  for (Eigen::Index b = 0; b < count; ++b) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      d_logits(i, b) =
          cfg.gamma * bce_scale * inv_batch * (Sigmoid(logits(i, b)) - targets_s(i, b));
    }
  }
  Eigen::MatrixXd d_dec_in, d_z_pp;
  model.decoder.Backward(dec_cache, d_recon, &out->grad.decoder, &d_dec_in);
  model.predictor.Backward(pp_cache, d_logits, &out->grad.predictor,
                           cfg.detach_contact_gradients ? nullptr : &d_z_pp);
  Eigen::MatrixXd d_z = d_dec_in.topRows(latent);
  if (!cfg.detach_contact_gradients) d_z += d_z_pp;

  Eigen::MatrixXd d_enc(2 * latent, count);
  const double kl_scale = cfg.beta * inv_batch;
  d_enc.topRows(latent) = d_z + kl_scale * mu;
  d_enc.bottomRows(latent) = (d_z.array() * eps.array() * 0.5 * sigma.array() +
                              kl_scale * 0.5 * (logvar.array().exp() - 1.0))
                                 .matrix();
  model.encoder.Backward(enc_cache, d_enc, &out->grad.encoder, nullptr);
}

}  // namespace

int VaeConfig::Ratio() const {
  if (!(encoder_frequency > 0.0) || !(control_frequency > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "frequencies must be positive");
  }
  const double r = control_frequency / encoder_frequency;
  const double rounded = std::round(r);
  if (rounded < 1.0 || std::abs(r - rounded) > 1e-9) {
    throw Error(ErrorCode::kInvalidParams,
                "control/encoder frequency ratio must be a positive integer");
  }
  return static_cast<int>(rounded);
}

void VaeConfig::Validate() const {
  Ratio();
  if (state_dim < 1 || window < 1 || future < 0 || contact_steps < 1 || latent < 1) {
    throw Error(ErrorCode::kInvalidParams, "bad VAE dimensions");
  }
  for (const auto* widths : {&encoder_hidden, &decoder_hidden, &predictor_hidden}) {
    for (int w : *widths) {
      if (w < 1) throw Error(ErrorCode::kInvalidParams, "widths must be >= 1");
    }
  }
  if (beta < 0.0 || gamma < 0.0 || learning_rate < 0.0 || batch_size < 1 || steps < 0) {
    throw Error(ErrorCode::kInvalidParams, "bad training hyper-parameters");
  }
}

nlohmann::json VaeConfig::ToJson() const {
  return {{"state_dim", state_dim},
          {"window", window},
          {"control_frequency", control_frequency},
          {"encoder_frequency", encoder_frequency},
          {"future", future},
          {"contact_steps", contact_steps},
          {"latent", latent},
          {"encoder_hidden", encoder_hidden},
          {"decoder_hidden", decoder_hidden},
          {"predictor_hidden", predictor_hidden},
          {"beta", beta},
          {"gamma", gamma},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"steps", steps},
          {"detach_contact_gradients", detach_contact_gradients},
          {"reduction", reduction == LossReduction::kMean ? "mean" : "sum"},
          {"seed", seed}};
}

VaeConfig VaeConfig::FromJson(const nlohmann::json& j) {
  VaeConfig c;
  c.state_dim = j.value("state_dim", c.state_dim);
  c.window = j.value("window", c.window);
  c.control_frequency = j.value("control_frequency", c.control_frequency);
  c.encoder_frequency = j.value("encoder_frequency", c.encoder_frequency);
  c.future = j.value("future", c.future);
  c.contact_steps = j.value("contact_steps", c.contact_steps);
  c.latent = j.value("latent", c.latent);
  if (j.contains("hidden")) {
    c.encoder_hidden = c.decoder_hidden = c.predictor_hidden = j["hidden"].get<std::vector<int>>();
  }
  c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
  c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
  c.predictor_hidden = j.value("predictor_hidden", c.predictor_hidden);
  c.beta = j.value("beta", c.beta);
  c.gamma = j.value("gamma", c.gamma);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.detach_contact_gradients = j.value("detach_contact_gradients", c.detach_contact_gradients);
  const std::string red = j.value("reduction", std::string("sum"));
  if (red != "mean" && red != "sum") {
    throw Error(ErrorCode::kInvalidParams, "reduction must be mean or sum");
  }
  c.reduction = red == "mean" ? LossReduction::kMean : LossReduction::kSum;
  c.seed = j.value("seed", c.seed);
  c.Validate();
  return c;
}

VaeConfig VaeConfig::DeskProfile() {
  VaeConfig c;
  // With summed reconstruction terms beta = 1 leaves the gait phase spread
  // over several latents.
  c.beta = 5.0;
  return c;
}

VaeConfig VaeConfig::PaperProfile() {
  VaeConfig c;
  c.control_frequency = 400.0;
  c.encoder_frequency = 200.0;
  c.window = 80;
  c.future = 19;
  c.contact_steps = 3;
  c.latent = 125;
  c.encoder_hidden = c.decoder_hidden = c.predictor_hidden = {256, 256};
  c.steps = 1000000;
  return c;
}

VaeModel VaeModel::Create(const VaeConfig& config, NormalizationStats stats) {
  config.Validate();
  if (stats.dim() != config.state_dim) {
    throw Error(ErrorCode::kShapeMismatch, "normalization stats do not match D");
  }
  VaeModel m;
  m.config = config;
  m.stats = std::move(stats);
  m.encoder = Mlp(Sizes(config.InputSize(), config.encoder_hidden, 2 * config.latent));
  m.decoder = Mlp(Sizes(config.latent + 3, config.decoder_hidden, config.OutputSize()));
  m.predictor = Mlp(Sizes(config.latent, config.predictor_hidden, config.ContactSize()));
  std::mt19937_64 rng(config.seed);
  m.encoder.Initialize(rng);
  m.decoder.Initialize(rng);
  m.predictor.Initialize(rng);
  return m;
}

std::int64_t VaeModel::ParameterCount() const {
  return encoder.ParameterCount() + decoder.ParameterCount() + predictor.ParameterCount();
}

Eigen::VectorXd VaeModel::Parameters() const {
  Eigen::VectorXd p(ParameterCount());
  Eigen::Index offset = 0;
  encoder.AppendParameters(&p, &offset);
  decoder.AppendParameters(&p, &offset);
  predictor.AppendParameters(&p, &offset);
  return p;
}

void VaeModel::SetParameters(const Eigen::VectorXd& params) {
  if (params.size() != ParameterCount()) {
    throw Error(ErrorCode::kShapeMismatch, "parameter vector has wrong length");
  }
  Eigen::Index offset = 0;
  encoder.LoadParameters(params.data(), &offset);
  decoder.LoadParameters(params.data(), &offset);
  predictor.LoadParameters(params.data(), &offset);
}

Posterior Encode(const VaeModel& model, const Eigen::Ref<const Eigen::VectorXd>& window) {
  if (window.size() != model.config.InputSize()) {
    throw Error(ErrorCode::kShapeMismatch, "encoder window must have N*D entries");
  }
  const Eigen::VectorXd out = model.encoder.Forward(window);
  const int l = model.config.latent;
  return {out.head(l), out.tail(l)};
}

Eigen::VectorXd Reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar,
                               const Eigen::VectorXd& noise) {
  if (mu.size() != logvar.size() || mu.size() != noise.size()) {
    throw Error(ErrorCode::kShapeMismatch, "reparameterize shape mismatch");
  }
  return mu + (0.5 * logvar.array()).exp().matrix().cwiseProduct(noise);
}

Eigen::VectorXd Decode(const VaeModel& model, const Eigen::Ref<const Eigen::VectorXd>& z,
                       const Eigen::Ref<const Eigen::VectorXd>& action) {
  if (z.size() != model.config.latent || action.size() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "decoder expects latent + 3 inputs");
  }
  Eigen::VectorXd in(z.size() + 3);
  in << z, action;
  return model.decoder.Forward(in);
}

Eigen::VectorXd PredictContacts(const VaeModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != model.config.latent) {
    throw Error(ErrorCode::kShapeMismatch, "predictor expects a latent vector");
  }
  return model.predictor.Forward(z).unaryExpr([](double v) { return Sigmoid(v); });
}

double KlDivergence(const Eigen::Ref<const Eigen::VectorXd>& mu,
                    const Eigen::Ref<const Eigen::VectorXd>& logvar) {
  if (mu.size() != logvar.size()) {
    throw Error(ErrorCode::kShapeMismatch, "KL shape mismatch");
  }
  return 0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
}

VaeGradient VaeGradient::ZerosLike(const VaeModel& model) {
  VaeGradient g{Mlp(model.encoder.sizes()), Mlp(model.decoder.sizes()),
                Mlp(model.predictor.sizes())};
  return g;
}

Eigen::VectorXd VaeGradient::Flatten() const {
  Eigen::VectorXd p(encoder.ParameterCount() + decoder.ParameterCount() +
                    predictor.ParameterCount());
  Eigen::Index offset = 0;
  encoder.AppendParameters(&p, &offset);
  decoder.AppendParameters(&p, &offset);
  predictor.AppendParameters(&p, &offset);
  return p;
}

void VaeGradient::Add(const VaeGradient& other) {
  auto add = [](Mlp& a, const Mlp& b) {
    for (int l = 0; l < a.num_layers(); ++l) {
      a.weights()[l] += b.weights()[l];
      a.biases()[l] += b.biases()[l];
    }
  };
  add(encoder, other.encoder);
  add(decoder, other.decoder);
  add(predictor, other.predictor);
}

LossTerms LossAndGradient(const VaeModel& model, const TrainingBatch& batch,
                          const Eigen::MatrixXd& noise, VaeGradient* grad, Execution execution) {
  const VaeConfig& cfg = model.config;
  const int b = batch.size();
  if (b == 0 || batch.windows.rows() != cfg.InputSize() || batch.actions.rows() != 3 ||
      batch.actions.cols() != b || batch.targets.rows() != cfg.OutputSize() ||
      batch.targets.cols() != b || batch.contacts.rows() != cfg.ContactSize() ||
      batch.contacts.cols() != b || noise.rows() != cfg.latent || noise.cols() != b) {
    throw Error(ErrorCode::kShapeMismatch, "training batch does not match config");
  }
  const int chunks = std::min(kGradientChunks, b);
  std::vector<ChunkResult> results(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  const bool want_grad = grad != nullptr;
  auto run = [&](int c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * b / chunks;
    const Eigen::Index end = static_cast<Eigen::Index>(c + 1) * b / chunks;
    if (want_grad) results[c].grad = VaeGradient::ZerosLike(model);
    try {
      ChunkLossAndGradient(model, batch, noise, begin, end - begin, want_grad, &results[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (execution == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < chunks; ++c) run(c);
  } else {
    for (int c = 0; c < chunks; ++c) run(c);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  LossTerms loss;
  for (int c = 0; c < chunks; ++c) {
    loss.mse += results[c].sums.mse;
    loss.kl += results[c].sums.kl;
    loss.bce += results[c].sums.bce;
    if (want_grad) {
      if (c == 0) {
        *grad = std::move(results[0].grad);
      } else {
        grad->Add(results[c].grad);
      }
    }
  }
  loss.total = loss.mse + cfg.beta * loss.kl + cfg.gamma * loss.bce;
  return loss;
}

}  // namespace latent_gait
