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

#ifndef LATENT_GAIT_QUADRUPED_MODEL_H_
#define LATENT_GAIT_QUADRUPED_MODEL_H_

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "json.hpp"

namespace latent_gait {

inline constexpr int kNumLegs = 4;
inline constexpr int kNumJoints = 12;
inline constexpr int kStateDim = 60;

// Column layout of the flattened state vector.
inline constexpr int kJointOffset = 0;
inline constexpr int kFootOffset = 12;
inline constexpr int kTorqueOffset = 24;
inline constexpr int kForceOffset = 36;
inline constexpr int kTwistOffset = 48;
inline constexpr int kDeltaPoseOffset = 54;

enum class Leg { kLF = 0, kRF = 1, kLH = 2, kRH = 3 };

inline constexpr std::array<Leg, kNumLegs> kAllLegs = {Leg::kLF, Leg::kRF, Leg::kLH, Leg::kRH};

const char* LegName(Leg leg);

// +1 for left legs, -1 for right legs.
inline double LegSide(Leg leg) { return (leg == Leg::kLF || leg == Leg::kLH) ? 1.0 : -1.0; }

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using FootArray = std::array<Vec3, kNumLegs>;

// true = foot in contact. Order LF, RF, LH, RH.
using ContactState = std::array<bool, kNumLegs>;

struct LinkLengths {
  double abduction = 0.0;  // lateral offset from HAA to HFE
  double thigh = 0.0;
  double shank = 0.0;
};

struct RobotDescription {
  double body_mass = 35.0;
  double standing_height = 0.45;
  std::array<Vec3, kNumLegs> hip_offsets = {Vec3(0.277, 0.116, 0.0), Vec3(0.277, -0.116, 0.0),
                                            Vec3(-0.277, 0.116, 0.0), Vec3(-0.277, -0.116, 0.0)};
  std::array<LinkLengths, kNumLegs> links = {
      LinkLengths{0.0635, 0.28, 0.28}, LinkLengths{0.0635, 0.28, 0.28},
      LinkLengths{0.0635, 0.28, 0.28}, LinkLengths{0.0635, 0.28, 0.28}};
  // Sign of the knee angle on the chosen IK branch; -1 bends knees backward.
  std::array<double, kNumLegs> knee_sign = {-1.0, -1.0, -1.0, -1.0};
  double gravity = 9.81;

  // Checks the invariants (positive mass and lengths, nominal stance
  // reachable). Throws Error(kInvalidParams).
  void Validate() const;

  // Foot position directly below the HFE joint at standing height.
  Vec3 NominalFoot(Leg leg) const;

  nlohmann::json ToJson() const;
  static RobotDescription FromJson(const nlohmann::json& j);
  // crc32 of the canonical JSON dump, as hex.
  std::string Hash() const;
};

RobotDescription LoadRobotDescription(const std::string& path);

struct RobotState {
  Eigen::Matrix<double, kNumJoints, 1> q = Eigen::Matrix<double, 12, 1>::Zero();
  FootArray ee = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  Eigen::Matrix<double, kNumJoints, 1> tau = Eigen::Matrix<double, 12, 1>::Zero();
  FootArray lambda = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  Eigen::Matrix<double, 6, 1> base_twist = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> delta_pose = Eigen::Matrix<double, 6, 1>::Zero();

  Vec3 LegJoints(Leg leg) const { return q.segment<3>(3 * static_cast<int>(leg)); }

  StateVector Flatten() const;
  static RobotState FromFlat(const Eigen::Ref<const Eigen::VectorXd>& x);
};

// Serial chain HAA (about x) -> HFE (about y) -> KFE (about y). With all
// angles zero the foot is (thigh + shank) straight below the HFE joint.
Vec3 LegForwardKinematics(const RobotDescription& robot, Leg leg, const Vec3& q_leg);

// 3x3 foot Jacobian d(foot)/d(q_leg) in the base frame.
Mat3 LegJacobian(const RobotDescription& robot, Leg leg, const Vec3& q_leg);

// Throws Error(kUnreachable) outside the leg workspace.
Vec3 LegInverseKinematics(const RobotDescription& robot, Leg leg, const Vec3& foot);

// Ground reaction forces for the stance feet. Vertical loads balance
// mass * (g + a_z); the horizontal inertial load is shared equally. Swing
// rows are exactly zero. Throws Error(kDegenerateSupport) with fewer than
// two stance feet.
FootArray StanceForceDistribution(const ContactState& contacts, const FootArray& feet,
                                  const Vec3& com_pos, const Vec3& com_accel,
                                  const RobotDescription& robot);

// tau_leg = J^T (-lambda_foot) for stance legs; swing legs get zero torque.
Eigen::Matrix<double, kNumJoints, 1> JointTorquesFromForces(const RobotDescription& robot,
                                                            const Eigen::Matrix<double, 12, 1>& q,
                                                            const FootArray& lambda,
                                                            const ContactState& contacts);

// Zeroes the force rows (and the matching torques) of swing feet.
void ZeroSwingForces(const RobotDescription& robot, const ContactState& contacts,
                     RobotState* state);

class NormalizationStats {
 public:
  static constexpr double kStdFloor = 1e-8;

  NormalizationStats() = default;
  NormalizationStats(Eigen::VectorXd mean, Eigen::VectorXd stddev);

  // Columns are samples.
  static NormalizationStats Compute(const Eigen::Ref<const Eigen::MatrixXd>& data);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }

  Eigen::VectorXd Standardize(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd Destandardize(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // Batch versions operate column-wise in place.
  void StandardizeColumns(Eigen::Ref<Eigen::MatrixXd> batch) const;
  void DestandardizeColumns(Eigen::Ref<Eigen::MatrixXd> batch) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
};

}  // namespace latent_gait

#endif  // LATENT_GAIT_QUADRUPED_MODEL_H_
