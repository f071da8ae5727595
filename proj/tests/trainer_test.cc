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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "latent_gait/error.h"
#include "latent_gait/model_io.h"

namespace latent_gait {
namespace {

TEST(Adam, ZeroLearningRateLeavesParameters) {
  AdamOptimizer adam(3);
  Eigen::VectorXd p(3);
  p << 1.0, -2.0, 0.5;
  const Eigen::VectorXd before = p;
  adam.Step(&p, Eigen::Vector3d(0.3, -1.0, 2.0), 0.0);
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepOnQuadratic) {
  // f = 0.5 * a * (x - c)^2, one step from x0.
  const double a = 3.0, c = 1.5, x0 = -0.2, lr = 0.01;
  const double g = a * (x0 - c);
  const double m = 0.1 * g, v = 0.001 * g * g;
  const double m_hat = m / (1.0 - 0.9), v_hat = v / (1.0 - 0.999);
  const double want = x0 - lr * m_hat / (std::sqrt(v_hat) + 1e-8);
  AdamOptimizer adam(1);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(1, x0);
  adam.Step(&x, Eigen::VectorXd::Constant(1, g), lr);
  EXPECT_NEAR(x(0), want, 1e-15);
}

DatasetConfig ShortDataset() {
  DatasetConfig d;
  d.n_trajectories = 3;
  d.duration = 3.0;
  return d;
}

VaeConfig SmallVae() {
  VaeConfig c;
  c.window = 5;
  c.future = 2;
  c.latent = 4;
  c.encoder_hidden = c.decoder_hidden = c.predictor_hidden = {16};
  c.batch_size = 8;
  c.steps = 20;
  return c;
}

TEST(Windows, SpacingAndNewestLast) {
  RobotDescription robot;
  const Dataset d = GenerateTrotDataset(ShortDataset(), robot);
  const VaeConfig c = SmallVae();
  const NormalizationStats stats(Eigen::VectorXd::Zero(60), Eigen::VectorXd::Ones(60));
  const Eigen::VectorXd w = BuildWindow(d.trajectories[0].states, 40, c, stats);
  for (int i = 0; i < c.window; ++i) {
    EXPECT_EQ(w.segment(i * 60, 60), d.trajectories[0].states.col(40 - 2 * (c.window - 1 - i)));
  }
  const auto valid = ValidWindows(d, c, {0});
  EXPECT_EQ(valid.front().k, 8);
  EXPECT_EQ(valid.back().k, 300 - 1 - 2);
}

TEST(Train, ZeroStepsReturnsInitialModel) {
  RobotDescription robot;
  const Dataset d = GenerateTrotDataset(ShortDataset(), robot);
  VaeConfig c = SmallVae();
  c.steps = 0;
  const TrainResult r = Train(d, c);
  const VaeModel fresh = VaeModel::Create(c, r.model.stats);
  EXPECT_EQ(r.model.Parameters(), fresh.Parameters());
  EXPECT_EQ(r.model.step, 0);
}

TEST(Train, DeterministicGivenSeed) {
  RobotDescription robot;
  const Dataset d = GenerateTrotDataset(ShortDataset(), robot);
  TrainOptions opt;
  opt.log_every = 5;
  const TrainResult a = Train(d, SmallVae(), opt);
  const TrainResult b = Train(d, SmallVae(), opt);
  EXPECT_EQ(a.model.Parameters(), b.model.Parameters());
  EXPECT_EQ(a.curve.size(), 4u);
  EXPECT_EQ(a.model.step, 20);
  std::ostringstream csv;
  WriteCurveCsv(a.curve, csv);
  EXPECT_EQ(csv.str().substr(0, 21), "step,mse,kl,bce,total");
}

TEST(Train, ShortDatasetRejected) {
  RobotDescription robot;
  DatasetConfig dc = ShortDataset();
  dc.duration = 0.1;
  const Dataset d = GenerateTrotDataset(dc, robot);
  try {
    Train(d, SmallVae());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDatasetTooShort);
  }
}

TEST(Train, NonFiniteLossAborts) {
  RobotDescription robot;
  const Dataset d = GenerateTrotDataset(ShortDataset(), robot);
  VaeConfig c = SmallVae();
  VaeModel m =
      VaeModel::Create(c, NormalizationStats(Eigen::VectorXd::Zero(60), Eigen::VectorXd::Ones(60)));
  m.decoder.biases().back()(0) = std::numeric_limits<double>::infinity();
  const auto windows = ValidWindows(d, c, {0});
  const TrainingBatch batch = BuildBatch(d, c, m.stats, {windows[0], windows[1]});
  AdamOptimizer adam(m.ParameterCount());
  const Eigen::VectorXd before = m.Parameters();
  try {
    TrainStep(&m, batch, Eigen::MatrixXd::Zero(c.latent, 2), &adam);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
  }
  EXPECT_EQ(m.step, 0);
}

TEST(ModelIo, RoundTripIsBitExact) {
  RobotDescription robot;
  const Dataset d = GenerateTrotDataset(ShortDataset(), robot);
  const TrainResult r = Train(d, SmallVae());
  const std::string path = testing::TempDir() + "model.lgvae";
  SaveModel(r.model, path, robot.Hash());
  std::string hash;
  const VaeModel back = LoadModel(path, &hash);
  EXPECT_EQ(hash, robot.Hash());
  EXPECT_EQ(back.step, r.model.step);
  EXPECT_EQ(back.config.ToJson(), r.model.config.ToJson());
  const Eigen::VectorXd a = back.Parameters(), b = r.model.Parameters();
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
  EXPECT_EQ(back.stats.mean(), r.model.stats.mean());
  EXPECT_EQ(back.stats.stddev(), r.model.stats.stddev());
  std::remove(path.c_str());
}

TEST(ModelIo, TruncatedFileIsCorrupt) {
  const VaeModel m = VaeModel::Create(
      SmallVae(), NormalizationStats(Eigen::VectorXd::Zero(60), Eigen::VectorXd::Ones(60)));
  auto bytes = SerializeModel(m);
  bytes.resize(bytes.size() - 100);
  try {
    DeserializeModel(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptFile);
  }
  auto flipped = SerializeModel(m);
  flipped[flipped.size() / 2] ^= 0x10;
  try {
    DeserializeModel(flipped);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptFile);
  }
}

TEST(ModelIo, BumpedVersionIsRejected) {
  const VaeModel m = VaeModel::Create(
      SmallVae(), NormalizationStats(Eigen::VectorXd::Zero(60), Eigen::VectorXd::Ones(60)));
  auto bytes = SerializeModel(m);
  bytes[8] += 1;  // low byte of the version field
  try {
    DeserializeModel(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
  }
}

TEST(ModelIo, MissingFile) {
  try {
    LoadModel("/nonexistent/model.lgvae");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kModelMissing);
  }
}

}  // namespace
}  // namespace latent_gait
