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

#include "latent_gait/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "latent_gait/error.h"

namespace latent_gait {

AdamOptimizer::AdamOptimizer(Eigen::Index size, AdamOptions options)
    : options_(options), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void AdamOptimizer::Step(Eigen::VectorXd* params, const Eigen::VectorXd& grad,
                         double learning_rate) {
  if (params->size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state does not match parameters");
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  params->array() -=
      learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + options_.epsilon);
}

std::vector<WindowIndex> ValidWindows(const Dataset& dataset, const VaeConfig& config,
                                      const std::vector<int>& trajectories) {
  const int history = config.HistoryTicks();
  const int future = std::max(config.future, config.contact_steps - 1);
  std::vector<WindowIndex> out;
  for (int t : trajectories) {
    const int n = dataset.trajectories.at(t).size();
    for (int k = history; k + future < n; ++k) out.push_back({t, k});
  }
  return out;
}

Eigen::VectorXd BuildWindow(const Eigen::MatrixXd& states, int k, const VaeConfig& config,
                            const NormalizationStats& stats) {
  const int r = config.Ratio();
  const int d = config.state_dim;
  if (k - r * (config.window - 1) < 0 || k >= states.cols() || states.rows() != d) {
    throw Error(ErrorCode::kShapeMismatch, "window does not fit the state history");
  }
  Eigen::VectorXd w(config.InputSize());
  for (int i = 0; i < config.window; ++i) {
    const int tick = k - r * (config.window - 1 - i);
    w.segment(i * d, d) = stats.Standardize(states.col(tick));
  }
  return w;
}

TrainingBatch BuildBatch(const Dataset& dataset, const VaeConfig& config,
                         const NormalizationStats& stats, const std::vector<WindowIndex>& windows) {
  const int b = static_cast<int>(windows.size());
  const int d = config.state_dim;
  TrainingBatch batch;
  batch.windows.resize(config.InputSize(), b);
  batch.actions.resize(3, b);
  batch.targets.resize(config.OutputSize(), b);
  batch.contacts.resize(config.ContactSize(), b);
  for (int i = 0; i < b; ++i) {
    const Trajectory& traj = dataset.trajectories.at(windows[i].traj);
    const int k = windows[i].k;
    batch.windows.col(i) = BuildWindow(traj.states, k, config, stats);
    batch.actions.col(i) = traj.actions.col(k);
    for (int m = 0; m <= config.future; ++m) {
      batch.targets.col(i).segment(m * d, d) = stats.Standardize(traj.states.col(k + m));
    }
    for (int j = 0; j < config.contact_steps; ++j) {
      for (int leg = 0; leg < kNumLegs; ++leg) {
        batch.contacts(j * kNumLegs + leg, i) = traj.contacts.at(k + j)[leg] ? 1.0 : 0.0;
      }
    }
  }
  return batch;
}

LossTerms TrainStep(VaeModel* model, const TrainingBatch& batch, const Eigen::MatrixXd& noise,
                    AdamOptimizer* optimizer, Execution execution) {
  VaeGradient grad;
  const LossTerms loss = LossAndGradient(*model, batch, noise, &grad, execution);
  const Eigen::VectorXd g = grad.Flatten();
  if (!std::isfinite(loss.total) || !g.allFinite()) {
    throw Error(ErrorCode::kNonFiniteLoss,
                "step " + std::to_string(model->step) + ": mse=" + std::to_string(loss.mse) +
                    " kl=" + std::to_string(loss.kl) + " bce=" + std::to_string(loss.bce) +
                    " |g|=" + std::to_string(g.norm()));
  }
  Eigen::VectorXd params = model->Parameters();
  optimizer->Step(&params, g, model->config.learning_rate);
  model->SetParameters(params);
  ++model->step;
  return loss;
}

TrainResult Train(const Dataset& dataset, const VaeConfig& config, const TrainOptions& options) {
  config.Validate();
  if (dataset.state_dim != config.state_dim) {
    throw Error(ErrorCode::kShapeMismatch, "dataset state dimension does not match config");
  }
  const int n_traj = static_cast<int>(dataset.trajectories.size());
  const int holdout = n_traj > options.holdout_trajectories ? options.holdout_trajectories : 0;
  TrainResult result;
  for (int t = 0; t < n_traj; ++t) {
    (t < n_traj - holdout ? result.train_trajectories : result.holdout_trajectories).push_back(t);
  }
  const std::vector<WindowIndex> windows = ValidWindows(dataset, config, result.train_trajectories);
  if (windows.empty()) {
    throw Error(ErrorCode::kDatasetTooShort,
                "need " + std::to_string(config.HistoryTicks()) + " history and " +
                    std::to_string(std::max(config.future, config.contact_steps - 1)) +
                    " future ticks");
  }

  Eigen::Index total = 0;
  for (int t : result.train_trajectories) total += dataset.trajectories[t].size();
  Eigen::MatrixXd stacked(config.state_dim, total);
  Eigen::Index col = 0;
  for (int t : result.train_trajectories) {
    const auto& s = dataset.trajectories[t].states;
    stacked.middleCols(col, s.cols()) = s;
    col += s.cols();
  }
  result.model = VaeModel::Create(config, NormalizationStats::Compute(stacked));

  AdamOptimizer adam(result.model.ParameterCount());
  std::mt19937_64 rng(config.seed ^ 0x5eed5eedULL);
  std::uniform_int_distribution<std::size_t> pick(0, windows.size() - 1);
  std::normal_distribution<double> normal;
  std::vector<WindowIndex> chosen(config.batch_size);
  Eigen::MatrixXd noise(config.latent, config.batch_size);
  LossTerms acc;
  int acc_n = 0;
  result.step_totals.reserve(config.steps);
  for (std::int64_t step = 0; step < config.steps; ++step) {
    for (auto& w : chosen) w = windows[pick(rng)];
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
    const TrainingBatch batch = BuildBatch(dataset, config, result.model.stats, chosen);
    const LossTerms loss = TrainStep(&result.model, batch, noise, &adam, options.execution);
    result.step_totals.push_back(loss.total);
    acc.mse += loss.mse;
    acc.kl += loss.kl;
    acc.bce += loss.bce;
    acc.total += loss.total;
    ++acc_n;
    if (options.log_every > 0 && (step + 1) % options.log_every == 0) {
      CurveRow row{step + 1, {acc.mse / acc_n, acc.kl / acc_n, acc.bce / acc_n, acc.total / acc_n}};
      result.curve.push_back(row);
      if (options.on_log) options.on_log(row);
      acc = {};
      acc_n = 0;
    }
  }
  return result;
}

void WriteCurveCsv(const std::vector<CurveRow>& curve, std::ostream& out) {
  out << "step,mse,kl,bce,total\n";
  for (const auto& r : curve) {
    out << r.step << ',' << r.loss.mse << ',' << r.loss.kl << ',' << r.loss.bce << ','
        << r.loss.total << '\n';
  }
}

EvalMetrics Evaluate(const VaeModel& model, const Dataset& dataset,
                     const std::vector<int>& trajectories) {
  const VaeConfig& cfg = model.config;
  const std::vector<WindowIndex> windows = ValidWindows(dataset, cfg, trajectories);
  EvalMetrics m;
  m.windows = static_cast<int>(windows.size());
  if (windows.empty()) {
    throw Error(ErrorCode::kDatasetTooShort, "no evaluation windows");
  }
  const int d = cfg.state_dim;
  std::int64_t correct = 0, correct_now = 0;
  double sq = 0.0;
  std::vector<double> first;
  first.reserve(windows.size());
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const std::vector<WindowIndex> part(windows.begin() + start,
                                        windows.begin() + std::min(windows.size(), start + kChunk));
    const TrainingBatch batch = BuildBatch(dataset, cfg, model.stats, part);
    const Eigen::MatrixXd enc = model.encoder.Forward(batch.windows);
    const Eigen::MatrixXd mu = enc.topRows(cfg.latent);
    Eigen::MatrixXd dec_in(cfg.latent + 3, batch.size());
    dec_in << mu, batch.actions;
    const Eigen::MatrixXd recon = model.decoder.Forward(dec_in);
    const Eigen::MatrixXd logits = model.predictor.Forward(mu);
    for (int b = 0; b < batch.size(); ++b) {
      for (int i = 0; i < cfg.ContactSize(); ++i) {
        const bool hit = (logits(i, b) > 0.0) == (batch.contacts(i, b) > 0.5);
        correct += hit;
        if (i < kNumLegs) correct_now += hit;
      }
      const Eigen::VectorXd diff = recon.col(b) - batch.targets.col(b);
      sq += diff.squaredNorm();
      first.push_back(diff.head(d).squaredNorm() / d);
    }
  }
  const double n = static_cast<double>(windows.size());
  m.contact_accuracy = correct / (n * cfg.ContactSize());
  m.current_contact_accuracy = correct_now / (n * kNumLegs);
  m.reconstruction_mse = sq / (n * cfg.OutputSize());
  const double mean = std::accumulate(first.begin(), first.end(), 0.0) / n;
  double var = 0.0;
  for (double v : first) var += (v - mean) * (v - mean);
  m.first_block_mse_mean = mean;
  m.first_block_mse_std = std::sqrt(var / n);
  return m;
}

double GradientCheck(const VaeModel& model, const TrainingBatch& batch,
                     const Eigen::MatrixXd& noise, double step) {
  VaeGradient grad;
  LossAndGradient(model, batch, noise, &grad, Execution::kSerial);
  const Eigen::VectorXd analytic = grad.Flatten();
  VaeModel probe_full = model;
  // With detached contact gradients the encoder only sees MSE + KL.
  VaeModel probe_enc = model;
  probe_enc.config.gamma = 0.0;
  const Eigen::Index n_enc = model.encoder.ParameterCount();
  Eigen::VectorXd params = model.Parameters();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    VaeModel& probe = (model.config.detach_contact_gradients && i < n_enc) ? probe_enc : probe_full;
    const double saved = params(i);
    params(i) = saved + step;
    probe.SetParameters(params);
    const double up = LossAndGradient(probe, batch, noise, nullptr, Execution::kSerial).total;
    params(i) = saved - step;
    probe.SetParameters(params);
    const double down = LossAndGradient(probe, batch, noise, nullptr, Execution::kSerial).total;
    params(i) = saved;
    probe.SetParameters(params);
    const double numeric = (up - down) / (2.0 * step);
    const double err =
        std::abs(analytic(i) - numeric) / std::max(1e-6, std::abs(analytic(i)) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace latent_gait
