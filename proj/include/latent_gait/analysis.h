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

#ifndef LATENT_GAIT_ANALYSIS_H_
#define LATENT_GAIT_ANALYSIS_H_

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "latent_gait/gait_synthesizer.h"
#include "latent_gait/playback.h"
#include "latent_gait/vae.h"

namespace latent_gait {

// ---------------------------------------------------------------------------
// Latent encoding of recorded trajectories.

// Posterior means (latent x T') for every tick with a full history window;
// first_tick is the tick of column 0.
struct EncodedTrajectory {
  Eigen::MatrixXd mu;
  Eigen::MatrixXd logvar;
  int first_tick = 0;
};
EncodedTrajectory EncodeTrajectory(const VaeModel& model, const Trajectory& trajectory);

// Nominal gait phase in [0, 2 pi) per tick: 0 through FULL_A, (0, pi] across
// SWING_LF_RH, pi through FULL_B, (pi, 2 pi] across SWING_RF_LH.
std::vector<double> SchedulePhase(const Trajectory& trajectory, const GaitParams& gait);

// Fourier coefficient of the mean-removed sequence at `freq_hz`.
struct Harmonic {
  double power_fraction = 0.0;  // share of the variance at that frequency
  double phase = 0.0;           // arg of the coefficient, rad
  double amplitude = 0.0;
};
Harmonic HarmonicAt(const Eigen::Ref<const Eigen::VectorXd>& series, double sample_hz,
                    double freq_hz);

// ---------------------------------------------------------------------------
// Drive and trot dimensions.

struct InjectionProbe {
  int dim = 0;
  double amplitude = 0.0;
  double period = 0.0;  // s
  int cycles = 0;
  int flips = 0;  // contact changes over the probe
  int cycles_with_both_swings = 0;
  double modulation = 0.0;      // summed std of the four contact probabilities
  double joint_range = 0.0;     // max over joints of decoded range, rad
  double foot_height = 0.0;     // max over feet of decoded z range, m
  double step_length = 0.0;     // max over feet of decoded x range, m
  double contact_period = 0.0;  // mean time between same-pattern onsets, s
  // Both diagonal swings in every cycle, and every foot's contact
  // probability spans at least 0.5 within each cycle.
  bool periodic = false;

  nlohmann::json ToJson() const;
};

// Open-loop decode of base + amplitude * sin(2 pi t / period) in `dim`.
InjectionProbe LatentInjectionProbe(const VaeModel& model, const Eigen::VectorXd& base, int dim,
                                    double amplitude, double period, const Eigen::Vector3d& action,
                                    int cycles = 4);

struct DriveIdentification {
  int drive_dim = -1;
  int trot_dim = -1;
  double gait_frequency = 0.0;
  double phase_offset = 0.0;  // |trot phase - drive phase| wrapped to [0, pi]
  // Drive amplitude that reproduces the encoded range of drive_dim, and the
  // sign that maps positive drive values onto SWING_LF_RH.
  double amplitude = 0.0;
  double center = 0.0;
  Eigen::VectorXd latent_mean;
  Eigen::VectorXd latent_std;          // spread of mu across the data
  Eigen::VectorXd posterior_variance;  // mean exp(logvar)
  std::vector<Harmonic> harmonics;     // per dimension, gait frequency
  std::vector<InjectionProbe> probes;  // per dimension
  // FULL_A / FULL_B split on the trot coordinate.
  double trot_split = 0.0;
  double full_a_sign = 1.0;

  nlohmann::json ToJson() const;
  // Restores the scalar fields and latent statistics; probes and harmonics
  // are not read back.
  static DriveIdentification FromJson(const nlohmann::json& j);
};

// Throws Error(kNoPeriodicDimension) when no single-dimension injection
// is periodic in the sense of InjectionProbe::periodic.
DriveIdentification IdentifyDriveDimension(const VaeModel& model, const Dataset& dataset,
                                           const std::vector<int>& trajectories);

// ---------------------------------------------------------------------------
// Cluster map.

// Nearest of the four trot stances to the current-step probabilities
// (Bernoulli log-likelihood); full support is split by the trot coordinate.
GaitPhase ClassifyStance(const Eigen::Ref<const Eigen::VectorXd>& probabilities, double trot_value,
                         const DriveIdentification& id);

struct ClusterPoint {
  double u = 0.0;  // drive coordinate
  double v = 0.0;  // trot coordinate
  Eigen::VectorXd z;
  Eigen::Vector4d probabilities = Eigen::Vector4d::Zero();
  GaitPhase label = GaitPhase::kFullA;
};

struct LatentClusterMap {
  int axis_u = 0;
  int axis_v = 1;
  std::vector<ClusterPoint> points;

  int DistinctLabels() const;
  void WriteCsv(std::ostream& out) const;
};

// Grid over (drive, trot) with the other dimensions held at `base`.
LatentClusterMap ClusterMapGrid(const VaeModel& model, const DriveIdentification& id,
                                const Eigen::VectorXd& base, int resolution, double u_extent,
                                double v_extent);
// Labels of recorded latent points (columns of z).
LatentClusterMap ClusterMapSamples(const VaeModel& model, const DriveIdentification& id,
                                   const Eigen::MatrixXd& z);

// Consecutive distinct labels of a sequence, with runs shorter than
// min_run ticks dropped.
std::vector<GaitPhase> CompressLabels(const std::vector<GaitPhase>& labels, int min_run = 1);
// True when `sequence` follows FULL_A -> SWING_LF_RH -> FULL_B -> SWING_RF_LH
// cyclically and contains all four.
bool FollowsTrotOrder(const std::vector<GaitPhase>& sequence);

// ---------------------------------------------------------------------------
// Saliency by activation maximisation.

struct SaliencyOptions {
  int steps = 200;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  double init_scale = 1.0;
};

struct SaliencyResult {
  double target_phase = 0.0;
  Eigen::MatrixXd map;             // N x D, accumulated |dL/dx|
  std::array<double, 6> groups{};  // q, ee, tau, lambda, twist, delta pose
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double initial_grad_norm = 0.0;
  double final_grad_norm = 0.0;
};

inline constexpr std::array<const char*, 6> kStateGroupNames = {"q",      "ee",    "tau",
                                                                "lambda", "twist", "delta_pose"};

// Mean posterior mean of dataset windows whose schedule phase is nearest to
// each requested phase.
std::vector<Eigen::VectorXd> PhaseTargets(const VaeModel& model, const Dataset& dataset,
                                          const std::vector<int>& trajectories,
                                          const std::vector<double>& phases);

// Gradient descent on a free standardized window to match `target` (squared error on
// mu); |gradient| is accumulated over all steps.
SaliencyResult SaliencyMap(const VaeModel& model, const Eigen::VectorXd& target,
                           const SaliencyOptions& options = {});

// ---------------------------------------------------------------------------
// ZMP to support line.

struct ZmpRecord {
  int tick = 0;
  Eigen::Vector2d zmp = Eigen::Vector2d::Zero();
  Eigen::Vector2d hind = Eigen::Vector2d::Zero();
  Eigen::Vector2d front = Eigen::Vector2d::Zero();
  double distance = 0.0;  // positive to the left of hind -> front
};

struct ZmpSummary {
  std::vector<ZmpRecord> records;
  double p95_abs = 0.0;
  double max_abs = 0.0;
  double mean = 0.0;
  double fraction_below(double bound) const;
};

// Base-frame accelerations: backward differences of the base linear velocity
// at sample_hz, then a centered moving average over `smoothing` ticks
// (truncated at the ends).
std::vector<Eigen::Vector2d> SmoothedBaseAcceleration(const Eigen::MatrixXd& states,
                                                      double sample_hz, int smoothing = 5);

// LIP ZMP with the CoM at the base origin; only ticks with exactly one
// diagonal pair in contact are recorded.
ZmpSummary ZmpSupportDistance(const Eigen::MatrixXd& states,
                              const std::vector<ContactState>& contacts, double sample_hz,
                              const RobotDescription& robot, int smoothing = 5);

// ---------------------------------------------------------------------------
// Gait timing statistics.

struct BoxStats {
  int count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
  nlohmann::json ToJson() const;
};
BoxStats Summarize(std::vector<double> values);

struct GaitTiming {
  std::vector<double> swing;           // s, diagonal swing runs
  std::vector<double> stance;          // s, full support between swings (0 if none)
  std::vector<int> swing_start_ticks;  // first swing tick of each swing sample
  std::vector<int> swing_end_ticks;    // touch-down tick of each swing sample
  int cycles = 0;                      // completed LF+RH then RF+LH swing pairs
  int other_ticks = 0;                 // ticks outside the four trot stances
  BoxStats swing_stats;
  BoxStats stance_stats;
  nlohmann::json ToJson() const;
};

// Runs cut at the log ends are dropped. Throws Error(kInsufficientData)
// with fewer than min_cycles completed cycles.
GaitTiming GaitParamDistribution(const std::vector<ContactState>& contacts, double sample_hz,
                                 int min_cycles = 5);

// Trot pattern of a contact state; kFullA stands for any full support and
// `ok` is false for non-trot patterns.
GaitPhase StancePattern(const ContactState& c, bool* ok);

// ---------------------------------------------------------------------------
// Stance classification from one latent coordinate.

// Accuracy of the best single threshold (either polarity) on latent
// coordinate `dim` at predicting each foot's contact, averaged over the
// four feet. Windows come from `trajectories`, encoded through mu.
double ThresholdStanceAccuracy(const VaeModel& model, const Dataset& dataset,
                               const std::vector<int>& trajectories, int dim);
// Best single-threshold accuracy of binary `labels` from `values`.
double StumpAccuracy(const std::vector<double>& values, const std::vector<bool>& labels);

// ---------------------------------------------------------------------------
// Statistics.

struct MannWhitneyResult {
  double u = 0.0;  // U of sample a
  double p_value = 1.0;
  bool exact = false;
};

// Midranks for ties. Exact null distribution when both samples have at most
// 20 entries, otherwise the tie-corrected normal approximation with
// continuity correction. Throws Error(kEmptySample).
MannWhitneyResult MannWhitneyU(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Closed-loop evaluation shared by the acceptance suite and ablations.

struct GaitEvaluation {
  bool diverged = false;
  int cycles = 0;
  bool sustained = false;  // >= min_cycles and no divergence
  BoxStats swing;
  BoxStats stance;
  std::string note;
  nlohmann::json ToJson() const;
};
GaitEvaluation EvaluateGait(const RunLog& log, int min_cycles = 10);

struct AblationConfig {
  int latent = 16;
  int width = 128;
  int window = 20;
  double encoder_frequency = 50.0;
  std::string label;
};

struct AblationRow {
  AblationConfig config;
  bool passed = false;
  std::string failure;  // empty when passed
  double contact_accuracy = 0.0;
  double reconstruction_mse = 0.0;
  int drive_dim = -1;
  int cycles = 0;
  double swing_median = 0.0;
  double train_seconds = 0.0;
};

struct AblationOptions {
  VaeConfig base = VaeConfig::DeskProfile();
  double swing_duration = 0.4;
  int run_seconds = 12;
  Execution execution = Execution::kParallel;
  // Reuse a model when this returns one (e.g. a cache); may be empty.
  std::function<bool(const VaeConfig&, VaeModel*)> lookup;
  std::function<void(const VaeConfig&, const VaeModel&)> store;
  std::function<void(const AblationRow&)> on_row;
};

AblationRow RunAblationConfig(const AblationConfig& config, const Dataset& dataset,
                              const RobotDescription& robot, const AblationOptions& options);
std::vector<AblationRow> AblationRun(const std::vector<AblationConfig>& grid,
                                     const Dataset& dataset, const RobotDescription& robot,
                                     const AblationOptions& options);
// Markdown table in the layout of the capacity table, with reference rows.
std::string AblationReport(const std::vector<AblationRow>& rows);

// Drive run at the identified drive dimension, prefilled from the dataset.
RunScript NominalScript(const DriveIdentification& id, double swing_duration, int ticks,
                        int stance_ticks = 0);
Eigen::MatrixXd DatasetPrefill(const Dataset& dataset, int trajectory, int start_tick,
                               const VaeConfig& config);

}  // namespace latent_gait

#endif  // LATENT_GAIT_ANALYSIS_H_
