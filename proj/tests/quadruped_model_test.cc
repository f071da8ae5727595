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

#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <random>

#include "latent_gait/error.h"

namespace latent_gait {
namespace {

using Eigen::Matrix4d;

Matrix4d Translate(const Vec3& t) {
  Matrix4d m = Matrix4d::Identity();
  m.block<3, 1>(0, 3) = t;
  return m;
}

Matrix4d Rotate(const Vec3& axis, double angle) {
  Matrix4d m = Matrix4d::Identity();
  m.block<3, 3>(0, 0) = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  return m;
}

// Homogeneous-transform product for the HAA -> HFE -> KFE chain.
Vec3 TransformChainFoot(const RobotDescription& robot, Leg leg, const Vec3& q) {
  const int i = static_cast<int>(leg);
  const LinkLengths& l = robot.links[i];
  const Matrix4d t = Translate(robot.hip_offsets[i]) * Rotate(Vec3::UnitX(), q(0)) *
                     Translate(Vec3(0, LegSide(leg) * l.abduction, 0)) *
                     Rotate(Vec3::UnitY(), q(1)) * Translate(Vec3(0, 0, -l.thigh)) *
                     Rotate(Vec3::UnitY(), q(2)) * Translate(Vec3(0, 0, -l.shank));
  return t.block<3, 1>(0, 3);
}

Vec3 RandomBackwardKneeAngles(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> haa(-0.5, 0.5), hfe(-1.0, 1.0), kfe(-2.5, -0.05);
  return Vec3(haa(rng), hfe(rng), kfe(rng));
}

TEST(LegKinematics, ZeroConfigurationHangsBelowHip) {
  RobotDescription robot;
  for (auto& l : robot.links) l = {1.0, 1.0, 1.0};
  for (Leg leg : kAllLegs) {
    const Vec3 hip = robot.hip_offsets[static_cast<int>(leg)];
    const Vec3 foot = LegForwardKinematics(robot, leg, Vec3::Zero());
    EXPECT_NEAR(foot.x(), hip.x(), 1e-15);
    EXPECT_NEAR(foot.y(), hip.y() + LegSide(leg), 1e-15);
    EXPECT_NEAR(foot.z(), hip.z() - 2.0, 1e-15);
  }
}

TEST(LegKinematics, FoldedKneeReturnsToThighMinusShank) {
  RobotDescription robot;
  robot.links[0] = {0.06, 0.3, 0.22};
  const Vec3 hfe = robot.hip_offsets[0] + Vec3(0, 0.06, 0);
  const Vec3 foot = LegForwardKinematics(robot, Leg::kLF, Vec3(0.0, 0.3, M_PI));
  EXPECT_NEAR((foot - hfe).norm(), 0.08, 1e-12);
}

TEST(LegKinematics, MatchesHomogeneousTransformChain) {
  RobotDescription robot;
  std::mt19937_64 rng(7);
  for (int n = 0; n < 200; ++n) {
    const Leg leg = kAllLegs[n % kNumLegs];
    const Vec3 q = RandomBackwardKneeAngles(rng);
    EXPECT_LT((LegForwardKinematics(robot, leg, q) - TransformChainFoot(robot, leg, q)).norm(),
              1e-12);
  }
}

TEST(LegKinematics, InverseRoundTripOnNominalStance) {
  RobotDescription robot;
  for (Leg leg : kAllLegs) {
    const Vec3 q = LegInverseKinematics(robot, leg, robot.NominalFoot(leg));
    EXPECT_LT((LegForwardKinematics(robot, leg, q) - robot.NominalFoot(leg)).norm(), 1e-9);
    EXPECT_LT(q(2), 0.0);  // knee bends backward
  }
}

TEST(LegKinematics, StretchedTargetGivesStraightKnee) {
  RobotDescription robot;
  const Vec3 target = LegForwardKinematics(robot, Leg::kRH, Vec3(0.1, 0.2, 0.0));
  const Vec3 q = LegInverseKinematics(robot, Leg::kRH, target);
  EXPECT_NEAR(q(2), 0.0, 1e-6);
  EXPECT_LT((LegForwardKinematics(robot, Leg::kRH, q) - target).norm(), 1e-9);
}

TEST(LegKinematics, RandomRoundTripBelowNanometre) {
  RobotDescription robot;
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const Leg leg = kAllLegs[n % kNumLegs];
    const Vec3 target = LegForwardKinematics(robot, leg, RandomBackwardKneeAngles(rng));
    const Vec3 q = LegInverseKinematics(robot, leg, target);
    worst = std::max(worst, (LegForwardKinematics(robot, leg, q) - target).norm());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(LegKinematics, UnreachableTargetThrows) {
  RobotDescription robot;
  try {
    LegInverseKinematics(robot, Leg::kLF, Vec3(0.277, 0.116, -2.0));
    FAIL() << "expected Unreachable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnreachable);
  }
}

FootArray NominalFeet(const RobotDescription& robot) {
  FootArray feet;
  for (Leg leg : kAllLegs) feet[static_cast<int>(leg)] = robot.NominalFoot(leg);
  return feet;
}

TEST(StanceForces, FourFeetCenteredShareWeight) {
  RobotDescription robot;
  const FootArray feet = NominalFeet(robot);
  const FootArray f =
      StanceForceDistribution({true, true, true, true}, feet, Vec3::Zero(), Vec3::Zero(), robot);
  const double mg = robot.body_mass * robot.gravity;
  for (const auto& v : f) {
    EXPECT_NEAR(v.z(), mg / 4.0, 1e-9);
    EXPECT_NEAR(v.x(), 0.0, 1e-12);
  }
}

TEST(StanceForces, DiagonalMidpointSplitsEvenly) {
  RobotDescription robot;
  const FootArray feet = NominalFeet(robot);
  const Vec3 mid = 0.5 * (feet[0] + feet[3]);
  const FootArray f = StanceForceDistribution({true, false, false, true}, feet,
                                              Vec3(mid.x(), mid.y(), 0.0), Vec3::Zero(), robot);
  const double mg = robot.body_mass * robot.gravity;
  EXPECT_NEAR(f[0].z(), mg / 2.0, 1e-9);
  EXPECT_NEAR(f[3].z(), mg / 2.0, 1e-9);
  EXPECT_EQ(f[1], Vec3::Zero());
  EXPECT_EQ(f[2], Vec3::Zero());
}

TEST(StanceForces, QuarterAlongLineSolvesMomentBalance) {
  RobotDescription robot;
  const FootArray feet = NominalFeet(robot);
  const Vec3 a = feet[1], b = feet[2];
  const Vec3 com = a + 0.25 * (b - a);
  const double w = robot.body_mass * robot.gravity;
  // [1 1; sa sb] [Fa Fb]' = [w 0]' with signed positions along the line.
  const double sa = -0.25, sb = 0.75;
  const double det = sb - sa;
  const double fa = (w * sb) / det, fb = (-w * sa) / det;
  const FootArray f = StanceForceDistribution({false, true, true, false}, feet,
                                              Vec3(com.x(), com.y(), 0.0), Vec3::Zero(), robot);
  EXPECT_NEAR(f[1].z(), fa, 1e-9);
  EXPECT_NEAR(f[2].z(), fb, 1e-9);
  EXPECT_NEAR(f[1].z() / w, 0.75, 1e-12);
}

TEST(StanceForces, VerticalSumTracksAcceleration) {
  RobotDescription robot;
  const FootArray feet = NominalFeet(robot);
  const Vec3 acc(0.3, -0.2, 0.7);
  for (ContactState c :
       {ContactState{true, true, true, true}, ContactState{true, false, false, true},
        ContactState{true, true, true, false}}) {
    const FootArray f = StanceForceDistribution(c, feet, Vec3(0.02, -0.01, 0.0), acc, robot);
    double fz = 0.0;
    for (int i = 0; i < kNumLegs; ++i) {
      fz += f[i].z();
      if (!c[i]) EXPECT_EQ(f[i], Vec3::Zero());
    }
    const double want = robot.body_mass * (robot.gravity + acc.z());
    EXPECT_NEAR(fz / want, 1.0, 1e-9);
  }
}

TEST(StanceForces, SingleFootIsDegenerate) {
  RobotDescription robot;
  try {
    StanceForceDistribution({true, false, false, false}, NominalFeet(robot), Vec3::Zero(),
                            Vec3::Zero(), robot);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateSupport);
  }
}

TEST(JointTorques, ZeroForcesGiveZeroTorques) {
  RobotDescription robot;
  Eigen::Matrix<double, 12, 1> q = Eigen::Matrix<double, 12, 1>::Constant(0.3);
  FootArray zero = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  EXPECT_EQ(JointTorquesFromForces(robot, q, zero, {true, true, true, true}).norm(), 0.0);
}

TEST(JointTorques, VerticalForceOnVerticalLegLeavesAbductionUnloaded) {
  RobotDescription robot;
  for (auto& l : robot.links) l.abduction = 0.0;
  Eigen::Matrix<double, 12, 1> q = Eigen::Matrix<double, 12, 1>::Zero();
  FootArray f = {Vec3(0, 0, 80), Vec3(0, 0, 80), Vec3(0, 0, 80), Vec3(0, 0, 80)};
  const auto tau = JointTorquesFromForces(robot, q, f, {true, true, true, true});
  for (int leg = 0; leg < kNumLegs; ++leg) EXPECT_NEAR(tau(3 * leg), 0.0, 1e-12);
}

TEST(JointTorques, MatchesFiniteDifferenceVirtualWork) {
  RobotDescription robot;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 50.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix<double, 12, 1> q;
    FootArray f;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      q.segment<3>(3 * leg) = RandomBackwardKneeAngles(rng);
      f[leg] = Vec3(n(rng), n(rng), std::abs(n(rng)) + 50.0);
    }
    const ContactState c = {true, trial % 2 == 0, true, false};
    const auto tau = JointTorquesFromForces(robot, q, f, c);
    for (Leg leg : kAllLegs) {
      const int i = static_cast<int>(leg);
      for (int j = 0; j < 3; ++j) {
        double want = 0.0;
        if (c[i]) {
          Vec3 qp = q.segment<3>(3 * i), qm = qp;
          qp(j) += 1e-6;
          qm(j) -= 1e-6;
          const Vec3 col =
              (LegForwardKinematics(robot, leg, qp) - LegForwardKinematics(robot, leg, qm)) / 2e-6;
          want = -col.dot(f[i]);
        }
        EXPECT_NEAR(tau(3 * i + j), want, 1e-5 * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST(RobotStateLayout, FlattenRoundTrip) {
  RobotState s;
  for (int i = 0; i < 12; ++i) s.q(i) = 0.1 * i;
  s.ee[2] = Vec3(1, 2, 3);
  s.lambda[3] = Vec3(4, 5, 6);
  s.base_twist(5) = 0.7;
  s.delta_pose(0) = -0.2;
  const StateVector x = s.Flatten();
  EXPECT_EQ(x.size(), 60);
  EXPECT_EQ(x(kFootOffset + 6), 1.0);
  EXPECT_EQ(x(kForceOffset + 11), 6.0);
  EXPECT_EQ(x(kTwistOffset + 5), 0.7);
  EXPECT_EQ(x(kDeltaPoseOffset), -0.2);
  EXPECT_EQ(RobotState::FromFlat(x).Flatten(), x);
}

TEST(Normalization, MeanMapsToZero) {
  Eigen::MatrixXd data = Eigen::MatrixXd::Random(5, 40);
  const auto stats = NormalizationStats::Compute(data);
  EXPECT_LT(stats.Standardize(stats.mean()).norm(), 1e-15);
}

TEST(Normalization, RoundTripOnBatch) {
  Eigen::MatrixXd data = Eigen::MatrixXd::Random(60, 100) * 7.0;
  data.row(3).setConstant(2.0);  // zero variance, floored
  const auto stats = NormalizationStats::Compute(data);
  EXPECT_GE(stats.stddev().minCoeff(), NormalizationStats::kStdFloor);
  Eigen::MatrixXd batch = data;
  stats.StandardizeColumns(batch);
  stats.DestandardizeColumns(batch);
  EXPECT_LT((batch - data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalization, TwoPointsStandardizeToUnit) {
  Eigen::MatrixXd data(3, 2);
  data << 0, 2, 0, 2, 0, 2;
  const auto stats = NormalizationStats::Compute(data);
  EXPECT_EQ(stats.Standardize(data.col(0)), Eigen::VectorXd::Constant(3, -1.0));
  EXPECT_EQ(stats.Standardize(data.col(1)), Eigen::VectorXd::Constant(3, 1.0));
}

TEST(RobotDescription, JsonRoundTripAndValidation) {
  RobotDescription robot;
  robot.body_mass = 30.0;
  const RobotDescription back = RobotDescription::FromJson(robot.ToJson());
  EXPECT_EQ(back.Hash(), robot.Hash());
  EXPECT_NO_THROW(back.Validate());
  robot.standing_height = 2.0;
  EXPECT_THROW(robot.Validate(), Error);
}

}  // namespace
}  // namespace latent_gait
