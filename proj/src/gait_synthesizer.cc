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

#include "latent_gait/gait_synthesizer.h"

#include <cmath>
#include <exception>
#include <random>

#include "latent_gait/error.h"

namespace latent_gait {
namespace {

int QuantizeTicks(double seconds, double frequency, const char* what) {
  const double ticks = seconds * frequency;
  const double rounded = std::round(ticks);
  if (std::abs(ticks - rounded) > 1e-6 * std::max(1.0, ticks)) {
    throw Error(ErrorCode::kInvalidParams,
                std::string(what) + " does not quantize to control ticks");
  }
  return static_cast<int>(rounded);
}

Eigen::Matrix2d Rot2(double yaw) {
  Eigen::Matrix2d r;
  r << std::cos(yaw), -std::sin(yaw), std::sin(yaw), std::cos(yaw);
  return r;
}

}  // namespace

int GaitParams::SwingTicks() const {
  return QuantizeTicks(swing_duration, control_frequency, "swing_duration");
}

int GaitParams::StanceTicks() const {
  return QuantizeTicks(stance_duration, control_frequency, "stance_duration");
}

void GaitParams::Validate() const {
  if (!(control_frequency > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "control_frequency must be positive");
  }
  if (SwingTicks() < 1) {
    throw Error(ErrorCode::kInvalidParams, "swing must last at least one tick");
  }
  if (StanceTicks() < 0 || step_height < 0.0) {
    throw Error(ErrorCode::kInvalidParams, "negative stance or step height");
  }
}

nlohmann::json GaitParams::ToJson() const {
  return {{"swing_duration", swing_duration},
          {"stance_duration", stance_duration},
          {"step_height", step_height},
          {"control_frequency", control_frequency}};
}

GaitParams GaitParams::FromJson(const nlohmann::json& j) {
  GaitParams p;
  p.swing_duration = j.value("swing_duration", p.swing_duration);
  p.stance_duration = j.value("stance_duration", p.stance_duration);
  p.step_height = j.value("step_height", p.step_height);
  p.control_frequency = j.value("control_frequency", p.control_frequency);
  p.Validate();
  return p;
}

const char* GaitPhaseName(GaitPhase phase) {
  switch (phase) {
    case GaitPhase::kFullA:
      return "FULL_A";
    case GaitPhase::kSwingLfRh:
      return "SWING_LF_RH";
    case GaitPhase::kFullB:
      return "FULL_B";
    case GaitPhase::kSwingRfLh:
      return "SWING_RF_LH";
  }
  return "?";
}

ContactState PhaseContacts(GaitPhase phase) {
  switch (phase) {
    case GaitPhase::kSwingLfRh:
      return {false, true, true, false};
    case GaitPhase::kSwingRfLh:
      return {true, false, false, true};
    default:
      return {true, true, true, true};
  }
}

ContactSchedule BuildContactSchedule(const GaitParams& params, int n_cycles) {
  params.Validate();
  if (n_cycles < 1) {
    throw Error(ErrorCode::kInvalidParams, "n_cycles must be at least 1");
  }
  const int swing = params.SwingTicks();
  const int stance = params.StanceTicks();
  ContactSchedule schedule;
  auto append = [&](GaitPhase phase, int length) {
    for (int i = 0; i < length; ++i) {
      schedule.contacts.push_back(PhaseContacts(phase));
      schedule.phases.push_back(phase);
      schedule.phase_tick.push_back(i);
      schedule.phase_length.push_back(length);
    }
  };
  for (int c = 0; c < n_cycles; ++c) {
    append(GaitPhase::kFullA, stance);
    append(GaitPhase::kSwingLfRh, swing);
    append(GaitPhase::kFullB, stance);
    append(GaitPhase::kSwingRfLh, swing);
  }
  return schedule;
}

std::pair<double, double> SwingFootTrajectory(double s, double step_length, double step_height) {
  const double horizontal = step_length * (s - std::sin(2.0 * M_PI * s) / (2.0 * M_PI));
  const double vertical = step_height * std::sin(M_PI * s);
  return {horizontal, vertical};
}

BaseMotion PlanBaseMotion(int n_ticks, double control_frequency,
                          const std::vector<TwistSegment>& segments, const RobotDescription& robot,
                          const BaseMotionOptions& options) {
  for (const auto& seg : segments) {
    if (seg.twist.head<2>().norm() > options.max_speed + 1e-12 ||
        std::abs(seg.twist.z()) > options.max_yaw_rate + 1e-12) {
      throw Error(ErrorCode::kCommandOutOfBounds, "twist command exceeds bounds");
    }
  }
  const double dt = 1.0 / control_frequency;
  const double alpha = 1.0 - std::exp(-dt / options.time_constant);

  BaseMotion motion;
  motion.height = robot.standing_height;
  motion.pose.resize(n_ticks);
  motion.body_twist.resize(n_ticks);
  motion.world_velocity.resize(n_ticks);
  motion.world_accel.resize(n_ticks);

  Vec3 pose = Vec3::Zero();
  Vec3 twist = Vec3::Zero();
  std::size_t seg = 0;
  for (int k = 0; k < n_ticks; ++k) {
    while (seg + 1 < segments.size() && segments[seg + 1].start_tick <= k) ++seg;
    const Vec3 command =
        (!segments.empty() && segments[seg].start_tick <= k) ? segments[seg].twist : Vec3::Zero();
    motion.pose[k] = pose;
    motion.body_twist[k] = twist;
    const Eigen::Vector2d v = Rot2(pose.z()) * twist.head<2>();
    motion.world_velocity[k] = Vec3(v.x(), v.y(), 0.0);

    pose.head<2>() += v * dt;
    pose.z() += twist.z() * dt;
    twist += alpha * (command - twist);
  }
  for (int k = 0; k < n_ticks; ++k) {
    if (k + 1 < n_ticks) {
      motion.world_accel[k] = (motion.world_velocity[k + 1] - motion.world_velocity[k]) / dt;
    } else {
      motion.world_accel[k] = k > 0 ? motion.world_accel[k - 1] : Vec3::Zero();
    }
  }
  return motion;
}

int DatasetConfig::TicksPerTrajectory() const {
  return static_cast<int>(std::llround(duration * gait.control_frequency));
}

nlohmann::json DatasetConfig::ToJson() const {
  return {{"gait", gait.ToJson()},
          {"n_trajectories", n_trajectories},
          {"duration", duration},
          {"twist_ranges", {{"vx", twist.vx}, {"vy", twist.vy}, {"yaw_rate", twist.yaw_rate}}},
          {"segment_duration", segment_duration},
          {"max_speed", base.max_speed},
          {"max_yaw_rate", base.max_yaw_rate},
          {"smoothing_time_constant", base.time_constant},
          {"max_step_offset", max_step_offset},
          {"seed", seed}};
}

DatasetConfig DatasetConfig::FromJson(const nlohmann::json& j) {
  DatasetConfig c;
  if (j.contains("gait")) c.gait = GaitParams::FromJson(j["gait"]);
  c.n_trajectories = j.value("n_trajectories", c.n_trajectories);
  c.duration = j.value("duration", c.duration);
  if (j.contains("twist_ranges")) {
    const auto& t = j["twist_ranges"];
    c.twist.vx = t.value("vx", c.twist.vx);
    c.twist.vy = t.value("vy", c.twist.vy);
    c.twist.yaw_rate = t.value("yaw_rate", c.twist.yaw_rate);
  }
  c.segment_duration = j.value("segment_duration", c.segment_duration);
  c.base.max_speed = j.value("max_speed", c.base.max_speed);
  c.base.max_yaw_rate = j.value("max_yaw_rate", c.base.max_yaw_rate);
  c.base.time_constant = j.value("smoothing_time_constant", c.base.time_constant);
  c.max_step_offset = j.value("max_step_offset", c.max_step_offset);
  c.seed = j.value("seed", c.seed);
  if (c.n_trajectories < 1 || c.duration <= 0.0 || c.segment_duration <= 0.0) {
    throw Error(ErrorCode::kInvalidParams, "bad dataset size parameters");
  }
  return c;
}

std::int64_t Dataset::TotalTicks() const {
  std::int64_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

Eigen::MatrixXd Dataset::StackedStates() const {
  Eigen::MatrixXd all(state_dim, TotalTicks());
  Eigen::Index col = 0;
  for (const auto& t : trajectories) {
    all.middleCols(col, t.size()) = t.states;
    col += t.size();
  }
  return all;
}

Trajectory GenerateTrajectory(const DatasetConfig& config, const RobotDescription& robot,
                              int index) {
  const GaitParams& gait = config.gait;
  gait.Validate();
  const int n_ticks = config.TicksPerTrajectory();
  const double fc = gait.control_frequency;
  const double dt = 1.0 / fc;

  Trajectory traj;
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                    static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  traj.seed = rng();

  const int seg_ticks = std::max(1, static_cast<int>(std::llround(config.segment_duration * fc)));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int start = 0; start < n_ticks; start += seg_ticks) {
    Vec3 twist(config.twist.vx * unit(rng), config.twist.vy * unit(rng),
               config.twist.yaw_rate * unit(rng));
    traj.segments.push_back({start, twist});
  }

  const int cycle_ticks = 2 * (gait.SwingTicks() + gait.StanceTicks());
  const ContactSchedule schedule = BuildContactSchedule(gait, n_ticks / cycle_ticks + 1);
  const BaseMotion base = PlanBaseMotion(n_ticks, fc, traj.segments, robot, config.base);

  traj.states.resize(kStateDim, n_ticks);
  traj.actions.resize(3, n_ticks);
  traj.contacts.resize(n_ticks);
  traj.phases.resize(n_ticks);

  std::array<Vec3, kNumLegs> feet_world;
  std::array<Vec3, kNumLegs> liftoff;
  std::array<Vec3, kNumLegs> target;
  for (Leg leg : kAllLegs) {
    const int i = static_cast<int>(leg);
    const Vec3 nominal = robot.NominalFoot(leg);
    feet_world[i] = Vec3(nominal.x(), nominal.y(), 0.0);
    liftoff[i] = target[i] = feet_world[i];
  }

  Vec3 control_pose = base.pose[0];
  std::size_t seg = 0;
  for (int k = 0; k < n_ticks; ++k) {
    while (seg + 1 < traj.segments.size() && traj.segments[seg + 1].start_tick <= k) {
      ++seg;
    }
    const GaitPhase phase = schedule.phases[k];
    const ContactState contacts = schedule.contacts[k];
    const Vec3& pose = base.pose[k];
    const Eigen::Matrix2d rot = Rot2(pose.z());
    if (phase == GaitPhase::kFullA && schedule.phase_tick[k] == 0) {
      control_pose = pose;
    }
    // A zero-length full-stance phase still starts a new cycle.
    if (gait.StanceTicks() == 0 && phase == GaitPhase::kSwingLfRh && schedule.phase_tick[k] == 0) {
      control_pose = pose;
    }

    for (Leg leg : kAllLegs) {
      const int i = static_cast<int>(leg);
      if (contacts[i]) continue;
      const int n = schedule.phase_length[k];
      const int tick = schedule.phase_tick[k];
      if (tick == 0) {
        liftoff[i] = feet_world[i];
        const double swing_time = n * dt;
        const Eigen::Vector2d displacement = base.world_velocity[k].head<2>() * swing_time;
        const double yaw_td = pose.z() + base.body_twist[k].z() * swing_time;
        const Eigen::Vector2d base_td = pose.head<2>() + displacement;
        const Eigen::Vector2d hip_td = base_td + Rot2(yaw_td) * robot.NominalFoot(leg).head<2>();
        Eigen::Vector2d offset = 0.5 * displacement;
        if (offset.norm() > config.max_step_offset) {
          offset *= config.max_step_offset / offset.norm();
        }
        target[i] = Vec3(hip_td.x() + offset.x(), hip_td.y() + offset.y(), 0.0);
      }
      const double s = static_cast<double>(tick + 1) / n;
      const auto [frac, height] = SwingFootTrajectory(s, 1.0, gait.step_height);
      feet_world[i].head<2>() =
          liftoff[i].head<2>() + frac * (target[i].head<2>() - liftoff[i].head<2>());
      feet_world[i].z() = height;
    }

    RobotState state;
    const Eigen::Matrix2d rot_t = rot.transpose();
    FootArray feet_base;
    for (Leg leg : kAllLegs) {
      const int i = static_cast<int>(leg);
      const Eigen::Vector2d rel = rot_t * (feet_world[i].head<2>() - pose.head<2>());
      const Vec3 foot(rel.x(), rel.y(), feet_world[i].z() - base.height);
      const Vec3 q_leg = LegInverseKinematics(robot, leg, foot);
      state.q.segment<3>(3 * i) = q_leg;
      state.ee[i] = LegForwardKinematics(robot, leg, q_leg);
      feet_base[i] = state.ee[i];
    }
    const Eigen::Vector2d acc_xy = rot_t * base.world_accel[k].head<2>();
    const Vec3 accel(acc_xy.x(), acc_xy.y(), 0.0);
    state.lambda = StanceForceDistribution(contacts, feet_base, Vec3(0.0, 0.0, 0.0), accel, robot);
    state.tau = JointTorquesFromForces(robot, state.q, state.lambda, contacts);
    const Vec3& tw = base.body_twist[k];
    state.base_twist << tw.x(), tw.y(), 0.0, 0.0, 0.0, tw.z();
    const Eigen::Vector2d dp =
        Rot2(control_pose.z()).transpose() * (pose.head<2>() - control_pose.head<2>());
    state.delta_pose << dp.x(), dp.y(), 0.0, 0.0, 0.0, pose.z() - control_pose.z();

    traj.states.col(k) = state.Flatten();
    traj.actions.col(k) = traj.segments[seg].twist;
    traj.contacts[k] = contacts;
    traj.phases[k] = phase;
  }
  return traj;
}

Dataset GenerateTrotDataset(const DatasetConfig& config, const RobotDescription& robot,
                            Execution execution) {
  config.gait.Validate();
  Dataset dataset;
  dataset.config = config;
  dataset.robot_hash = robot.Hash();
  dataset.trajectories.resize(config.n_trajectories);
  if (execution == Execution::kParallel) {
    // Each trajectory owns its random stream, so the result does not depend
    // on scheduling.
    std::vector<std::exception_ptr> errors(config.n_trajectories);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < config.n_trajectories; ++i) {
      try {
        dataset.trajectories[i] = GenerateTrajectory(config, robot, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (int i = 0; i < config.n_trajectories; ++i) {
      dataset.trajectories[i] = GenerateTrajectory(config, robot, i);
    }
  }
  return dataset;
}

}  // namespace latent_gait
