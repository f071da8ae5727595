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

#ifndef LATENT_GAIT_GAIT_SYNTHESIZER_H_
#define LATENT_GAIT_GAIT_SYNTHESIZER_H_

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "latent_gait/execution.h"
#include "latent_gait/quadruped_model.h"

namespace latent_gait {

struct GaitParams {
  double swing_duration = 0.4;    // s
  double stance_duration = 0.08;  // s, four-foot support between swings
  double step_height = 0.08;      // m
  double control_frequency = 100.0;

  int SwingTicks() const;
  int StanceTicks() const;
  // Throws Error(kInvalidParams) if durations do not quantize to ticks.
  void Validate() const;

  nlohmann::json ToJson() const;
  static GaitParams FromJson(const nlohmann::json& j);
};

enum class GaitPhase { kFullA = 0, kSwingLfRh = 1, kFullB = 2, kSwingRfLh = 3 };

const char* GaitPhaseName(GaitPhase phase);
ContactState PhaseContacts(GaitPhase phase);

struct ContactSchedule {
  std::vector<ContactState> contacts;
  std::vector<GaitPhase> phases;
  std::vector<int> phase_tick;    // tick index inside the current phase
  std::vector<int> phase_length;  // length of the current phase in ticks

  int size() const { return static_cast<int>(contacts.size()); }
};

// Each cycle is FULL_A, SWING(LF+RH), FULL_B, SWING(RF+LH). Phases of zero
// length are omitted.
ContactSchedule BuildContactSchedule(const GaitParams& params, int n_cycles);

// Returns (horizontal fraction of the step, vertical offset) at swing
// progress s in [0, 1]. The horizontal value is scaled by step_length.
std::pair<double, double> SwingFootTrajectory(double s, double step_length, double step_height);

// Commanded base twist (body-frame vx, vy, yaw rate) from start_tick on.
struct TwistSegment {
  int start_tick = 0;
  Vec3 twist = Vec3::Zero();
};

struct BaseMotionOptions {
  double max_speed = 0.5;      // m/s, planar
  double max_yaw_rate = 0.5;   // rad/s
  double time_constant = 0.2;  // s, first-order velocity smoothing
};

struct BaseMotion {
  // Planar pose (x, y, yaw) in the world frame; height is constant.
  std::vector<Vec3> pose;
  // Body-frame (vx, vy, yaw rate).
  std::vector<Vec3> body_twist;
  // World-frame linear velocity (vx, vy, 0) and acceleration.
  std::vector<Vec3> world_velocity;
  std::vector<Vec3> world_accel;
  double height = 0.0;
};

// Throws Error(kCommandOutOfBounds).
BaseMotion PlanBaseMotion(int n_ticks, double control_frequency,
                          const std::vector<TwistSegment>& segments, const RobotDescription& robot,
                          const BaseMotionOptions& options = {});

struct TwistRanges {
  double vx = 0.3;
  double vy = 0.15;
  double yaw_rate = 0.3;
};

struct DatasetConfig {
  GaitParams gait;
  int n_trajectories = 20;
  double duration = 20.0;  // s per trajectory
  TwistRanges twist;
  double segment_duration = 2.0;
  BaseMotionOptions base;
  // Bound on the foothold offset from the hip projection.
  double max_step_offset = 0.15;
  std::uint64_t seed = 1;

  int TicksPerTrajectory() const;
  nlohmann::json ToJson() const;
  static DatasetConfig FromJson(const nlohmann::json& j);
};

struct Trajectory {
  Eigen::MatrixXd states;   // kStateDim x T
  Eigen::MatrixXd actions;  // 3 x T
  std::vector<ContactState> contacts;
  std::vector<GaitPhase> phases;
  std::vector<TwistSegment> segments;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(states.cols()); }
};

struct Dataset {
  DatasetConfig config;
  std::string robot_hash;
  int state_dim = kStateDim;
  std::vector<Trajectory> trajectories;

  std::int64_t TotalTicks() const;
  // All states side by side, kStateDim x TotalTicks().
  Eigen::MatrixXd StackedStates() const;
};

// Deterministic in (config.seed, index).
Trajectory GenerateTrajectory(const DatasetConfig& config, const RobotDescription& robot,
                              int index);

Dataset GenerateTrotDataset(const DatasetConfig& config, const RobotDescription& robot,
                            Execution execution = Execution::kParallel);

}  // namespace latent_gait

#endif  // LATENT_GAIT_GAIT_SYNTHESIZER_H_
