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

#ifndef LATENT_GAIT_PLANNER_H_
#define LATENT_GAIT_PLANNER_H_

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "latent_gait/vae.h"

namespace latent_gait {

// Drive signal A * sin^3(phi) written into latent dimension drive_dim.
struct DriveState {
  double amplitude = 0.0;
  double swing_duration = 0.4;  // s; one half-cycle of phi
  int stance_ticks = 0;         // epsilon: zero-hold ticks per half-cycle
  double phase = 0.0;           // phi, rad, non-decreasing
  int stance_counter = 0;       // k_epsilon
  int drive_dim = 0;
};

double DriveSignalValue(double amplitude, double phase);

// pi / (swing_duration * f_c): one swing per half-cycle.
double PhaseIncrement(double swing_duration, double control_frequency);

// True when phase sits on a multiple of pi (tolerance 1e-9).
bool AtHalfCycleBoundary(double phase);

// Hold branch while on a boundary with k_eps < eps, otherwise advance and
// reset the counter. An advance that reaches or passes the next multiple of
// pi is snapped onto it.
DriveState AdvanceDrive(const DriveState& state, double control_frequency);

// Second-order low-pass (bilinear transform with prewarping), transposed
// direct form II, one channel per vector entry.
class ButterworthFilter {
 public:
  struct Coefficients {
    double b0, b1, b2, a1, a2;
  };

  ButterworthFilter() = default;
  ButterworthFilter(double cutoff_hz, double sample_hz, int channels);

  static Coefficients Design(double cutoff_hz, double sample_hz);
  // |H(e^{jw})| at the given frequency.
  static double Magnitude(const Coefficients& c, double freq_hz, double sample_hz);

  // The first call primes the delay line with its input (no start-up
  // transient).
  Eigen::VectorXd Step(const Eigen::VectorXd& x);
  void Reset() { primed_ = false; }
  const Coefficients& coefficients() const { return c_; }

 private:
  Coefficients c_{1.0, 0.0, 0.0, 0.0, 0.0};
  Eigen::VectorXd z1_;
  Eigen::VectorXd z2_;
  bool primed_ = false;
};

struct PlannerOptions {
  double filter_cutoff_hz = 10.0;
  bool filter_enabled = true;
};

struct PlanOutput {
  Eigen::VectorXd mu;
  Eigen::VectorXd logvar;
  Eigen::VectorXd z_raw;     // mu with the drive value written in
  Eigen::VectorXd z;         // after the filter; fed to both heads
  Eigen::VectorXd decoded;   // (M+1)*D, standardized
  Eigen::VectorXd contacts;  // 4*J probabilities
  double drive_value = 0.0;
  DriveState drive;  // drive state used for this tick
  double elbo = 0.0;
  double elbo_mse = 0.0;
  double elbo_kl = 0.0;
};

// Per-tick ELBO of a window: MSE between the first decoded block (from the
// unmodified posterior mean and the action) and the newest window state,
// averaged over D, plus the KL term with beta = 1.
struct ElboTerms {
  double mse = 0.0;
  double kl = 0.0;
  double total = 0.0;
};
ElboTerms WindowElbo(const VaeModel& model, const Eigen::VectorXd& window,
                     const Posterior& posterior, const Eigen::Vector3d& action);

class Planner {
 public:
  // Throws Error(kModelMissing) for a null model.
  Planner(const VaeModel* model, PlannerOptions options = {});

  // `window` is standardized (N*D). Advances the drive state.
  PlanOutput Step(const Eigen::VectorXd& window, const Eigen::Vector3d& action);

  DriveState& drive() { return drive_; }
  const DriveState& drive() const { return drive_; }
  const VaeModel& model() const { return *model_; }
  double control_frequency() const { return model_->config.control_frequency; }
  void Reset();

 private:
  const VaeModel* model_;
  PlannerOptions options_;
  ButterworthFilter filter_;
  DriveState drive_;
};

// theta = max(values) * margin. Needs min_seconds of samples at sample_hz.
// Throws Error(kInsufficientData).
double CalibrateThreshold(const std::vector<double>& elbo_values, double sample_hz,
                          double margin = 1.25, double min_seconds = 60.0);

enum class EventKind { kDisturbanceDetected, kCadenceRamp, kRecovered, kDiverged };
const char* EventKindName(EventKind kind);

struct PlannerEvent {
  int tick = 0;
  EventKind kind = EventKind::kDisturbanceDetected;
  std::string detail;
};

class ElboMonitor {
 public:
  ElboMonitor() = default;
  explicit ElboMonitor(double theta) : theta_(theta) {}

  // Returns true on the tick the ELBO first rises above theta after being
  // below it.
  bool Update(double elbo, double dt);

  double theta() const { return theta_; }
  void set_theta(double theta) { theta_ = theta; }
  bool above() const { return above_; }
  // Time since the ELBO last exceeded theta; infinite before any crossing.
  double time_below() const { return time_below_; }
  double last() const { return last_; }

 private:
  double theta_ = 0.0;
  bool above_ = false;
  double time_below_ = 1e300;
  double last_ = 0.0;
};

struct CadenceOptions {
  bool enabled = true;
  double nominal_swing = 0.4;  // s
  double min_swing = 0.1;      // s
  double ramp_seconds = 1.5;
  double hold_seconds = 2.0;
};

// Halves the swing duration (bounded below) on an ELBO spike with a linear
// ramp, and ramps back once the ELBO has stayed below theta for the hold
// time.
class CadenceResponse {
 public:
  enum class Mode { kNominal, kToFast, kFast, kToNominal };

  CadenceResponse() = default;
  explicit CadenceResponse(CadenceOptions options) : options_(options) {}

  void Update(const ElboMonitor& monitor, bool crossed, int tick, double dt, DriveState* drive,
              std::vector<PlannerEvent>* events);

  Mode mode() const { return mode_; }
  double target_swing() const;
  const CadenceOptions& options() const { return options_; }
  void set_nominal_swing(double s) { options_.nominal_swing = s; }

 private:
  CadenceOptions options_;
  Mode mode_ = Mode::kNominal;
  bool alarmed_ = false;
};

}  // namespace latent_gait

#endif  // LATENT_GAIT_PLANNER_H_
