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

#include "latent_gait/quadruped_model.h"

#include <zlib.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "latent_gait/error.h"

namespace latent_gait {
namespace {

Mat3 RotX(double a) {
  Mat3 r;
  const double c = std::cos(a), s = std::sin(a);
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 RotY(double a) {
  Mat3 r;
  const double c = std::cos(a), s = std::sin(a);
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

nlohmann::json VecJson(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 JsonVec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kInvalidParams, "expected a 3-vector");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

const char* LegName(Leg leg) {
  switch (leg) {
    case Leg::kLF:
      return "LF";
    case Leg::kRF:
      return "RF";
    case Leg::kLH:
      return "LH";
    case Leg::kRH:
      return "RH";
  }
  return "?";
}

void RobotDescription::Validate() const {
  if (!(body_mass > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "body_mass must be positive");
  }
  if (!(gravity > 0.0) || !(standing_height > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "gravity and standing_height must be positive");
  }
  for (const auto& l : links) {
    if (!(l.abduction > 0.0 && l.thigh > 0.0 && l.shank > 0.0)) {
      throw Error(ErrorCode::kInvalidParams, "link lengths must be positive");
    }
  }
  for (Leg leg : kAllLegs) {
    // Throws kUnreachable, rethrown as a parameter problem.
    try {
      LegInverseKinematics(*this, leg, NominalFoot(leg));
    } catch (const Error&) {
      throw Error(ErrorCode::kInvalidParams,
                  std::string("standing height unreachable for leg ") + LegName(leg));
    }
  }
}

Vec3 RobotDescription::NominalFoot(Leg leg) const {
  const int i = static_cast<int>(leg);
  return hip_offsets[i] + Vec3(0.0, LegSide(leg) * links[i].abduction, -standing_height);
}

nlohmann::json RobotDescription::ToJson() const {
  nlohmann::json j;
  j["body_mass"] = body_mass;
  j["standing_height"] = standing_height;
  j["gravity"] = gravity;
  for (Leg leg : kAllLegs) {
    const int i = static_cast<int>(leg);
    auto& lj = j["legs"][LegName(leg)];
    lj["hip_offset"] = VecJson(hip_offsets[i]);
    lj["abduction"] = links[i].abduction;
    lj["thigh"] = links[i].thigh;
    lj["shank"] = links[i].shank;
    lj["knee_sign"] = knee_sign[i];
  }
  return j;
}

RobotDescription RobotDescription::FromJson(const nlohmann::json& j) {
  RobotDescription r;
  r.body_mass = j.value("body_mass", r.body_mass);
  r.standing_height = j.value("standing_height", r.standing_height);
  r.gravity = j.value("gravity", r.gravity);
  if (j.contains("legs")) {
    for (Leg leg : kAllLegs) {
      const int i = static_cast<int>(leg);
      if (!j["legs"].contains(LegName(leg))) continue;
      const auto& lj = j["legs"][LegName(leg)];
      if (lj.contains("hip_offset")) r.hip_offsets[i] = JsonVec(lj["hip_offset"]);
      r.links[i].abduction = lj.value("abduction", r.links[i].abduction);
      r.links[i].thigh = lj.value("thigh", r.links[i].thigh);
      r.links[i].shank = lj.value("shank", r.links[i].shank);
      r.knee_sign[i] = lj.value("knee_sign", r.knee_sign[i]) < 0 ? -1.0 : 1.0;
    }
  }
  r.Validate();
  return r;
}

std::string RobotDescription::Hash() const {
  const std::string dump = ToJson().dump();
  const uLong crc =
      crc32(0L, reinterpret_cast<const Bytef*>(dump.data()), static_cast<uInt>(dump.size()));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

RobotDescription LoadRobotDescription(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidParams, path + ": " + e.what());
  }
  return RobotDescription::FromJson(j.contains("robot") ? j["robot"] : j);
}

StateVector RobotState::Flatten() const {
  StateVector x;
  x.segment<12>(kJointOffset) = q;
  for (int i = 0; i < kNumLegs; ++i) {
    x.segment<3>(kFootOffset + 3 * i) = ee[i];
    x.segment<3>(kForceOffset + 3 * i) = lambda[i];
  }
  x.segment<12>(kTorqueOffset) = tau;
  x.segment<6>(kTwistOffset) = base_twist;
  x.segment<6>(kDeltaPoseOffset) = delta_pose;
  return x;
}

RobotState RobotState::FromFlat(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != kStateDim) {
    throw Error(ErrorCode::kShapeMismatch, "state vector must have 60 entries");
  }
  RobotState s;
  s.q = x.segment<12>(kJointOffset);
  for (int i = 0; i < kNumLegs; ++i) {
    s.ee[i] = x.segment<3>(kFootOffset + 3 * i);
    s.lambda[i] = x.segment<3>(kForceOffset + 3 * i);
  }
  s.tau = x.segment<12>(kTorqueOffset);
  s.base_twist = x.segment<6>(kTwistOffset);
  s.delta_pose = x.segment<6>(kDeltaPoseOffset);
  return s;
}

Vec3 LegForwardKinematics(const RobotDescription& robot, Leg leg, const Vec3& q_leg) {
  const int i = static_cast<int>(leg);
  const LinkLengths& l = robot.links[i];
  const Vec3 shank(0.0, 0.0, -l.shank);
  const Vec3 thigh(0.0, 0.0, -l.thigh);
  const Vec3 abd(0.0, LegSide(leg) * l.abduction, 0.0);
  return robot.hip_offsets[i] +
         RotX(q_leg[0]) * (abd + RotY(q_leg[1]) * (thigh + RotY(q_leg[2]) * shank));
}

Mat3 LegJacobian(const RobotDescription& robot, Leg leg, const Vec3& q_leg) {
  const int i = static_cast<int>(leg);
  const LinkLengths& l = robot.links[i];
  const Mat3 r0 = RotX(q_leg[0]);
  const Mat3 r01 = r0 * RotY(q_leg[1]);
  const Vec3 hip = robot.hip_offsets[i];
  const Vec3 hfe = hip + r0 * Vec3(0.0, LegSide(leg) * l.abduction, 0.0);
  const Vec3 kfe = hfe + r01 * Vec3(0.0, 0.0, -l.thigh);
  const Vec3 foot = LegForwardKinematics(robot, leg, q_leg);
  const Vec3 ax0 = Vec3::UnitX();
  const Vec3 ax12 = r0 * Vec3::UnitY();
  Mat3 j;
  j.col(0) = ax0.cross(foot - hip);
  j.col(1) = ax12.cross(foot - hfe);
  j.col(2) = ax12.cross(foot - kfe);
  return j;
}

Vec3 LegInverseKinematics(const RobotDescription& robot, Leg leg, const Vec3& foot) {
  const int i = static_cast<int>(leg);
  const LinkLengths& l = robot.links[i];
  const double side = LegSide(leg);
  const Vec3 p = foot - robot.hip_offsets[i];

  const double r2 = p.y() * p.y() + p.z() * p.z() - l.abduction * l.abduction;
  if (r2 < 0.0) {
    throw Error(ErrorCode::kUnreachable,
                std::string(LegName(leg)) + ": target inside abduction radius");
  }
  const double zs = -std::sqrt(r2);  // sagittal-plane height, foot below hip
  const double q0 = std::atan2(p.z(), p.y()) - std::atan2(zs, side * l.abduction);

  const double xs = p.x();
  const double d2 = xs * xs + zs * zs;
  double c = (d2 - l.thigh * l.thigh - l.shank * l.shank) / (2.0 * l.thigh * l.shank);
  constexpr double kEdge = 1e-9;
  if (c > 1.0 + kEdge || c < -1.0 - kEdge) {
    throw Error(ErrorCode::kUnreachable,
                std::string(LegName(leg)) + ": target outside leg annulus");
  }
  c = std::clamp(c, -1.0, 1.0);
  const double q2 = robot.knee_sign[i] * std::acos(c);
  const double q1 =
      std::atan2(-xs, -zs) - std::atan2(l.shank * std::sin(q2), l.thigh + l.shank * std::cos(q2));
  auto wrap = [](double a) { return std::remainder(a, 2.0 * M_PI); };
  return Vec3(wrap(q0), wrap(q1), q2);
}

FootArray StanceForceDistribution(const ContactState& contacts, const FootArray& feet,
                                  const Vec3& com_pos, const Vec3& com_accel,
                                  const RobotDescription& robot) {
  std::vector<int> stance;
  for (int i = 0; i < kNumLegs; ++i) {
    if (contacts[i]) stance.push_back(i);
  }
  if (stance.size() < 2) {
    throw Error(ErrorCode::kDegenerateSupport, "at least two stance feet are required");
  }
  const double m = robot.body_mass;
  const double vertical = m * (robot.gravity + com_accel.z());
  const int n = static_cast<int>(stance.size());
  const Eigen::Vector2d horizontal = m * com_accel.head<2>() / n;

  Eigen::VectorXd fz(n);
  if (n == 2) {
    // Zero moment about the CoM projection along the support line.
    const Eigen::Vector2d a = feet[stance[0]].head<2>();
    const Eigen::Vector2d b = feet[stance[1]].head<2>();
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (com_pos.head<2>() - a).dot(ab) / len2 : 0.5;
    t = std::clamp(t, 0.0, 1.0);
    fz << vertical * (1.0 - t), vertical * t;
  } else {
    // Minimum-norm loads with zero net moment about the CoM projection.
    Eigen::MatrixXd a(3, n);
    for (int k = 0; k < n; ++k) {
      a(0, k) = 1.0;
      a(1, k) = feet[stance[k]].x() - com_pos.x();
      a(2, k) = feet[stance[k]].y() - com_pos.y();
    }
    const Eigen::Vector3d rhs(vertical, 0.0, 0.0);
    fz = a.completeOrthogonalDecomposition().solve(rhs);
  }

  FootArray out = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  for (int k = 0; k < n; ++k) {
    out[stance[k]] = Vec3(horizontal.x(), horizontal.y(), fz[k]);
  }
  return out;
}

Eigen::Matrix<double, kNumJoints, 1> JointTorquesFromForces(const RobotDescription& robot,
                                                            const Eigen::Matrix<double, 12, 1>& q,
                                                            const FootArray& lambda,
                                                            const ContactState& contacts) {
  Eigen::Matrix<double, kNumJoints, 1> tau = Eigen::Matrix<double, kNumJoints, 1>::Zero();
  for (Leg leg : kAllLegs) {
    const int i = static_cast<int>(leg);
    if (!contacts[i]) continue;
    const Vec3 ql = q.segment<3>(3 * i);
    tau.segment<3>(3 * i) = LegJacobian(robot, leg, ql).transpose() * (-lambda[i]);
  }
  return tau;
}

void ZeroSwingForces(const RobotDescription& robot, const ContactState& contacts,
                     RobotState* state) {
  for (int i = 0; i < kNumLegs; ++i) {
    if (!contacts[i]) state->lambda[i].setZero();
  }
  state->tau = JointTorquesFromForces(robot, state->q, state->lambda, contacts);
}

NormalizationStats::NormalizationStats(Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.size() != stddev_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "mean/std size mismatch");
  }
  stddev_ = stddev_.cwiseMax(kStdFloor);
}

NormalizationStats NormalizationStats::Compute(const Eigen::Ref<const Eigen::MatrixXd>& data) {
  if (data.cols() == 0) {
    throw Error(ErrorCode::kInsufficientData, "empty dataset");
  }
  const Eigen::VectorXd mean = data.rowwise().mean();
  const Eigen::VectorXd var = (data.colwise() - mean).array().square().rowwise().mean();
  return NormalizationStats(mean, var.cwiseSqrt());
}

Eigen::VectorXd NormalizationStats::Standardize(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return (x - mean_).cwiseQuotient(stddev_);
}

Eigen::VectorXd NormalizationStats::Destandardize(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return x.cwiseProduct(stddev_) + mean_;
}

void NormalizationStats::StandardizeColumns(Eigen::Ref<Eigen::MatrixXd> batch) const {
  batch.colwise() -= mean_;
  batch.array().colwise() /= stddev_.array();
}

void NormalizationStats::DestandardizeColumns(Eigen::Ref<Eigen::MatrixXd> batch) const {
  batch.array().colwise() *= stddev_.array();
  batch.colwise() += mean_;
}

}  // namespace latent_gait
