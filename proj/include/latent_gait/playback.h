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

#ifndef LATENT_GAIT_PLAYBACK_H_
#define LATENT_GAIT_PLAYBACK_H_

#include <Eigen/Core>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "latent_gait/planner.h"
#include "latent_gait/quadruped_model.h"
#include "latent_gait/vae.h"

namespace latent_gait {

// Ring of the most recent raw (not standardized) states.
class StateBuffer {
 public:
  explicit StateBuffer(int capacity);

  void Push(const Eigen::VectorXd& state);
  int size() const { return static_cast<int>(states_.size()); }
  int capacity() const { return capacity_; }
  // lag 0 is the newest state.
  const Eigen::VectorXd& Back(int lag) const;

 private:
  int capacity_;
  std::deque<Eigen::VectorXd> states_;
};

// Standardized window {k - r(N-1), ..., k - r, k}. Throws
// Error(kBufferUnderflow) when fewer than r(N-1)+1 states are held.
Eigen::VectorXd SampleWindow(const StateBuffer& buffer, const VaeConfig& config,
                             const NormalizationStats& stats);

struct Disturbance {
  int start_tick = 0;
  int duration_ticks = 1;
  Eigen::Matrix<double, 6, 1> twist_offset = Eigen::Matrix<double, 6, 1>::Zero();
  double noise_scale = 0.0;

  bool ActiveAt(int tick) const { return tick >= start_tick && tick < start_tick + duration_ticks; }
};

// base_twist += offset; Gaussian noise on q and ee; forces and torques
// recomputed from the perturbed configuration.
RobotState InjectDisturbance(const RobotState& state, const Disturbance& disturbance,
                             const ContactState& contacts, const RobotDescription& robot,
                             std::mt19937_64& rng);

// Contact iff probability > threshold.
ContactState EstimateContacts(const Eigen::Ref<const Eigen::VectorXd>& probabilities,
                              double threshold = 0.5);

// A drive/action change applied before the planner runs at `tick`.
struct DriveCommand {
  int tick = 0;
  std::optional<double> amplitude;
  std::optional<double> swing_duration;
  std::optional<int> stance_ticks;
  std::optional<Eigen::Vector3d> action;
};

struct RunScript {
  DriveState drive;  // initial drive state, including drive_dim
  Eigen::Vector3d action = Eigen::Vector3d::Zero();
  std::vector<DriveCommand> commands;
  std::vector<Disturbance> disturbances;
  int duration_ticks = 1000;
  std::uint64_t seed = 1;
  // ELBO monitoring; theta <= 0 disables detection.
  double theta = 0.0;
  CadenceOptions cadence{false};

  nlohmann::json ToJson() const;
  static RunScript FromJson(const nlohmann::json& j);
};

struct TickRecord {
  int tick = 0;
  Eigen::VectorXd state;         // measured state at this tick (raw units)
  Eigen::VectorXd contact_prob;  // current-step probabilities (block 0)
  ContactState contacts{};       // applied to the state pushed this tick
  Eigen::VectorXd z_raw;
  Eigen::VectorXd z;
  DriveState drive;
  double drive_value = 0.0;
  Eigen::Vector3d action = Eigen::Vector3d::Zero();
  double elbo = 0.0;
  double elbo_mse = 0.0;
  double elbo_kl = 0.0;
  bool disturbed = false;
  double tick_seconds = 0.0;
};

struct RunLog {
  std::string model_hash;
  RunScript script;
  double theta = 0.0;
  double control_frequency = 100.0;
  std::vector<TickRecord> ticks;
  std::vector<PlannerEvent> events;
  bool diverged = false;
  int diverged_tick = -1;
  std::string diverged_reason;

  // Applied contact per tick, in order.
  std::vector<ContactState> ContactLog() const;
};

struct PlaybackOptions {
  PlannerOptions planner;
  double joint_limit = M_PI;
  double speed_limit = 5.0;
  // Optional prefill from recorded states (columns, oldest first). When
  // empty the standing pose is replicated.
  Eigen::MatrixXd prefill;
};

// Standing pose: nominal feet, four-foot support, zero twist.
RobotState StandingState(const RobotDescription& robot);

// One kinematic-playback session, stepped a tick at a time. Commands and
// disturbances take effect on the next Step().
class ClosedLoop {
 public:
  ClosedLoop(const VaeModel& model, const RobotDescription& robot, const RunScript& script,
             const PlaybackOptions& options = {});

  // Refills the buffer and restores the script's initial drive state.
  void Reset();
  void Apply(const DriveCommand& command);
  // start_tick is absolute.
  void AddDisturbance(const Disturbance& disturbance);
  // Throws Error(kDivergedState) once the loop has diverged.
  TickRecord Step();

  int tick() const { return tick_; }
  bool diverged() const { return diverged_; }
  const std::string& diverged_reason() const { return diverged_reason_; }
  const std::vector<PlannerEvent>& events() const { return events_; }
  const DriveState& drive() const { return planner_.drive(); }
  const Eigen::Vector3d& action() const { return action_; }
  double theta() const { return script_.theta; }
  void set_theta(double theta);

 private:
  const VaeModel* model_;
  RobotDescription robot_;
  PlaybackOptions options_;
  RunScript script_;
  StateBuffer buffer_;
  Planner planner_;
  ElboMonitor monitor_;
  CadenceResponse cadence_;
  Eigen::Vector3d action_ = Eigen::Vector3d::Zero();
  std::vector<Disturbance> disturbances_;
  std::mt19937_64 rng_;
  int tick_ = 0;
  bool diverged_ = false;
  std::string diverged_reason_;
  std::vector<PlannerEvent> events_;
};

// Durations of the most recently completed diagonal-swing and full-support
// runs in a stream of applied contacts. Zero until one has completed.
class PhaseTimer {
 public:
  explicit PhaseTimer(double control_frequency) : dt_(1.0 / control_frequency) {}

  void Update(const ContactState& contacts);
  double last_swing() const { return last_swing_; }
  double last_stance() const { return last_stance_; }

 private:
  double dt_;
  int pattern_ = -1;
  int run_ = 0;
  bool seen_change_ = false;
  double last_swing_ = 0.0;
  double last_stance_ = 0.0;
};

// Kinematic playback: decoder block 1 becomes the next measured state.
// Divergence ends the run early and is reported in the log.
RunLog RunClosedLoop(const VaeModel& model, const RobotDescription& robot, const RunScript& script,
                     const PlaybackOptions& options = {});

// Sanity check used by the playback loop; returns a reason or empty.
std::string DivergenceReason(const Eigen::VectorXd& state, double joint_limit, double speed_limit);

void WriteRunLogJsonl(const RunLog& log, const std::string& path);
RunLog ReadRunLogJsonl(const std::string& path);
// tick, elbo, c_LF..c_RH, swing_duration, vx, vy, vz, wx, wy, wz
void WriteRunLogCsv(const RunLog& log, const std::string& path);

// Short identifier of the model parameters (crc32 hex).
std::string ModelHash(const VaeModel& model);

}  // namespace latent_gait

#endif  // LATENT_GAIT_PLAYBACK_H_
