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

#include "latent_gait/planner.h"

#include <algorithm>
#include <cmath>
#include <complex>

#include "latent_gait/error.h"

namespace latent_gait {

bool AtHalfCycleBoundary(double phase) {
  return std::abs(phase - M_PI * std::round(phase / M_PI)) < 1e-9;
}

double DriveSignalValue(double amplitude, double phase) {
  // sin(k pi) is not exactly zero in floating point.
  if (AtHalfCycleBoundary(phase)) return 0.0;
  const double s = std::sin(phase);
  return amplitude * s * s * s;
}

double PhaseIncrement(double swing_duration, double control_frequency) {
  if (!(swing_duration > 0.0) || !(control_frequency > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "swing duration must be positive");
  }
  return M_PI / (swing_duration * control_frequency);
}

DriveState AdvanceDrive(const DriveState& state, double control_frequency) {
  DriveState next = state;
  if (AtHalfCycleBoundary(state.phase) && state.stance_counter < state.stance_ticks) {
    next.stance_counter = state.stance_counter + 1;
    return next;
  }
  const double boundary = M_PI * (std::floor(state.phase / M_PI + 1e-9) + 1.0);
  next.phase = state.phase + PhaseIncrement(state.swing_duration, control_frequency);
  if (next.phase >= boundary - 1e-9) next.phase = boundary;
  next.stance_counter = 0;
  return next;
}

ButterworthFilter::ButterworthFilter(double cutoff_hz, double sample_hz, int channels)
    : c_(Design(cutoff_hz, sample_hz)),
      z1_(Eigen::VectorXd::Zero(channels)),
      z2_(Eigen::VectorXd::Zero(channels)) {}

ButterworthFilter::Coefficients ButterworthFilter::Design(double cutoff_hz, double sample_hz) {
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * sample_hz)) {
    throw Error(ErrorCode::kInvalidParams, "cutoff must lie in (0, Nyquist)");
  }
  const double k = std::tan(M_PI * cutoff_hz / sample_hz);
  const double norm = 1.0 / (1.0 + M_SQRT2 * k + k * k);
  Coefficients c;
  c.b0 = k * k * norm;
  c.b1 = 2.0 * c.b0;
  c.b2 = c.b0;
  c.a1 = 2.0 * (k * k - 1.0) * norm;
  c.a2 = (1.0 - M_SQRT2 * k + k * k) * norm;
  return c;
}

double ButterworthFilter::Magnitude(const Coefficients& c, double freq_hz, double sample_hz) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * M_PI * freq_hz / sample_hz);
  const std::complex<double> z2 = z1 * z1;
  return std::abs((c.b0 + c.b1 * z1 + c.b2 * z2) / (1.0 + c.a1 * z1 + c.a2 * z2));
}

Eigen::VectorXd ButterworthFilter::Step(const Eigen::VectorXd& x) {
  if (x.size() != z1_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "filter channel count mismatch");
  }
  if (!primed_) {
    // Steady state for a constant input x.
    z2_ = (c_.b2 - c_.a2) * x;
    z1_ = (c_.b1 - c_.a1) * x + z2_;
    primed_ = true;
  }
  Eigen::VectorXd y = c_.b0 * x + z1_;
  z1_ = c_.b1 * x - c_.a1 * y + z2_;
  z2_ = c_.b2 * x - c_.a2 * y;
  return y;
}

ElboTerms WindowElbo(const VaeModel& model, const Eigen::VectorXd& window,
                     const Posterior& posterior, const Eigen::Vector3d& action) {
  const int d = model.config.state_dim;
  const Eigen::VectorXd first = Decode(model, posterior.mu, action).head(d);
  ElboTerms e;
  e.mse = (first - window.tail(d)).squaredNorm() / d;
  e.kl = KlDivergence(posterior.mu, posterior.logvar);
  e.total = e.mse + e.kl;
  return e;
}

Planner::Planner(const VaeModel* model, PlannerOptions options) : model_(model), options_(options) {
  if (model_ == nullptr) throw Error(ErrorCode::kModelMissing, "planner needs a model");
  filter_ = ButterworthFilter(options_.filter_cutoff_hz, model_->config.control_frequency,
                              model_->config.latent);
}

void Planner::Reset() {
  filter_.Reset();
  const int dim = drive_.drive_dim;
  drive_ = DriveState{};
  drive_.drive_dim = dim;
}

PlanOutput Planner::Step(const Eigen::VectorXd& window, const Eigen::Vector3d& action) {
  const VaeConfig& cfg = model_->config;
  if (drive_.drive_dim < 0 || drive_.drive_dim >= cfg.latent) {
    throw Error(ErrorCode::kInvalidParams, "drive dimension out of range");
  }
  PlanOutput out;
  const Posterior post = Encode(*model_, window);
  out.mu = post.mu;
  out.logvar = post.logvar;
  out.drive = drive_;
  out.drive_value = DriveSignalValue(drive_.amplitude, drive_.phase);
  out.z_raw = post.mu;
  out.z_raw(drive_.drive_dim) = out.drive_value;
  out.z = options_.filter_enabled ? filter_.Step(out.z_raw) : out.z_raw;
  out.decoded = Decode(*model_, out.z, action);
  out.contacts = PredictContacts(*model_, out.z);
  const ElboTerms e = WindowElbo(*model_, window, post, action);
  out.elbo = e.total;
  out.elbo_mse = e.mse;
  out.elbo_kl = e.kl;
  drive_ = AdvanceDrive(drive_, cfg.control_frequency);
  return out;
}

double CalibrateThreshold(const std::vector<double>& elbo_values, double sample_hz, double margin,
                          double min_seconds) {
  if (elbo_values.empty() || elbo_values.size() < min_seconds * sample_hz - 1e-9) {
    throw Error(
        ErrorCode::kInsufficientData,
        "threshold calibration needs " + std::to_string(min_seconds) + " s of nominal samples");
  }
  if (!(margin > 0.0)) throw Error(ErrorCode::kInvalidParams, "margin must be positive");
  return *std::max_element(elbo_values.begin(), elbo_values.end()) * margin;
}

const char* EventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::kDisturbanceDetected:
      return "disturbance_detected";
    case EventKind::kCadenceRamp:
      return "cadence_ramp";
    case EventKind::kRecovered:
      return "recovered";
    case EventKind::kDiverged:
      return "diverged";
  }
  return "unknown";
}

bool ElboMonitor::Update(double elbo, double dt) {
  last_ = elbo;
  const bool above = elbo > theta_;
  const bool crossed = above && !above_;
  above_ = above;
  if (above) {
    time_below_ = 0.0;
  } else if (time_below_ < 1e300) {
    time_below_ += dt;
  }
  return crossed;
}

double CadenceResponse::target_swing() const {
  return std::max(options_.min_swing, 0.5 * options_.nominal_swing);
}

void CadenceResponse::Update(const ElboMonitor& monitor, bool crossed, int tick, double dt,
                             DriveState* drive, std::vector<PlannerEvent>* events) {
  auto emit = [&](EventKind kind, std::string detail) {
    if (events != nullptr) events->push_back({tick, kind, std::move(detail)});
  };
  if (crossed) emit(EventKind::kDisturbanceDetected, "elbo " + std::to_string(monitor.last()));
  const double fast = target_swing();
  const double rate = (options_.nominal_swing - fast) / options_.ramp_seconds;
  if (monitor.above()) {
    alarmed_ = true;
    if (options_.enabled && mode_ != Mode::kToFast && mode_ != Mode::kFast) {
      mode_ = Mode::kToFast;
      emit(EventKind::kCadenceRamp, "swing -> " + std::to_string(fast));
    }
  } else if (alarmed_ && monitor.time_below() >= options_.hold_seconds) {
    alarmed_ = false;
    emit(EventKind::kRecovered, "");
    if (options_.enabled) {
      mode_ = Mode::kToNominal;
      emit(EventKind::kCadenceRamp, "swing -> " + std::to_string(options_.nominal_swing));
    }
  }
  if (!options_.enabled) return;

  switch (mode_) {
    case Mode::kToFast:
      drive->swing_duration = drive->swing_duration - rate * dt;
      if (drive->swing_duration <= fast + 1e-12) {
        drive->swing_duration = fast;
        mode_ = Mode::kFast;
      }
      break;
    case Mode::kToNominal:
      drive->swing_duration = drive->swing_duration + rate * dt;
      if (drive->swing_duration >= options_.nominal_swing - 1e-12) {
        drive->swing_duration = options_.nominal_swing;
        mode_ = Mode::kNominal;
      }
      break;
    default:
      break;
  }
}

}  // namespace latent_gait
