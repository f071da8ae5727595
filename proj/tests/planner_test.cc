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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "latent_gait/error.h"

namespace latent_gait {
namespace {

TEST(DriveSignal, Examples) {
  EXPECT_EQ(DriveSignalValue(0.0, 1.234), 0.0);
  EXPECT_EQ(DriveSignalValue(1.0, M_PI / 2), 1.0);
  EXPECT_NEAR(DriveSignalValue(0.5, M_PI / 6), 0.0625, 1e-15);
  EXPECT_NEAR(DriveSignalValue(2.0, -M_PI / 2), -2.0, 1e-15);
}

TEST(DriveSignal, PhaseIncrementIsOneSwingPerHalfCycle) {
  EXPECT_DOUBLE_EQ(PhaseIncrement(0.4, 100.0), M_PI / 40.0);
  EXPECT_DOUBLE_EQ(PhaseIncrement(0.25, 400.0), M_PI / 100.0);
}

TEST(DriveSignal, BoundaryDetection) {
  EXPECT_TRUE(AtHalfCycleBoundary(0.0));
  EXPECT_TRUE(AtHalfCycleBoundary(M_PI));
  EXPECT_TRUE(AtHalfCycleBoundary(6 * M_PI));
  EXPECT_TRUE(AtHalfCycleBoundary(M_PI + 5e-10));
  EXPECT_FALSE(AtHalfCycleBoundary(M_PI + 1e-8));
  EXPECT_FALSE(AtHalfCycleBoundary(M_PI / 2));
}

TEST(AdvanceDrive, HoldBranch) {
  DriveState s;
  s.phase = M_PI;
  s.stance_counter = 2;
  s.stance_ticks = 5;
  const DriveState n = AdvanceDrive(s, 100.0);
  EXPECT_EQ(n.phase, M_PI);
  EXPECT_EQ(n.stance_counter, 3);
}

TEST(AdvanceDrive, ResetBranch) {
  DriveState s;
  s.phase = M_PI;
  s.stance_counter = 5;
  s.stance_ticks = 5;
  s.swing_duration = 0.4;
  const DriveState n = AdvanceDrive(s, 100.0);
  EXPECT_EQ(n.phase, M_PI + M_PI / 40.0);
  EXPECT_EQ(n.stance_counter, 0);
}

TEST(AdvanceDrive, IncrementBranchAwayFromBoundary) {
  DriveState s;
  s.phase = 1.0;
  s.stance_ticks = 5;
  s.swing_duration = 0.25;
  const DriveState n = AdvanceDrive(s, 100.0);
  EXPECT_EQ(n.phase, 1.0 + M_PI / 25.0);
  EXPECT_EQ(n.stance_counter, 0);
}

TEST(AdvanceDrive, SnapsOntoTheBoundary) {
  DriveState s;
  s.swing_duration = 0.4;
  s.phase = M_PI - 0.3 * (M_PI / 40.0);
  EXPECT_EQ(AdvanceDrive(s, 100.0).phase, M_PI);
  // Overshooting by most of a step also lands on pi.
  s.phase = M_PI - 0.9 * (M_PI / 40.0);
  EXPECT_EQ(AdvanceDrive(s, 100.0).phase, M_PI);
}

TEST(AdvanceDrive, AmplitudeAndDimensionPassThrough) {
  DriveState s;
  s.amplitude = 1.7;
  s.drive_dim = 4;
  s.phase = 0.3;
  const DriveState n = AdvanceDrive(s, 100.0);
  EXPECT_EQ(n.amplitude, 1.7);
  EXPECT_EQ(n.drive_dim, 4);
}

// Drive values over `ticks` ticks.
std::vector<double> DriveTrace(DriveState s, int ticks, double fc) {
  std::vector<double> v;
  for (int t = 0; t < ticks; ++t) {
    v.push_back(DriveSignalValue(s.amplitude, s.phase));
    s = AdvanceDrive(s, fc);
  }
  return v;
}

struct ZeroRun {
  int start, length;
};

std::vector<ZeroRun> ZeroRuns(const std::vector<double>& v) {
  std::vector<ZeroRun> runs;
  for (int t = 0; t < static_cast<int>(v.size()); ++t) {
    if (v[t] != 0.0) continue;
    if (!runs.empty() && runs.back().start + runs.back().length == t) {
      ++runs.back().length;
    } else {
      runs.push_back({t, 1});
    }
  }
  return runs;
}

class ZeroSet : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(ZeroSet, HoldTicksAndSwingContract) {
  const auto [eps, swing] = GetParam();
  const double fc = 100.0;
  DriveState s;
  s.amplitude = 1.0;
  s.stance_ticks = eps;
  s.swing_duration = swing;
  const std::vector<double> v = DriveTrace(s, 2000, fc);
  const std::vector<ZeroRun> runs = ZeroRuns(v);
  ASSERT_GT(runs.size(), 6u);
  // The last run may be cut by the end of the trace.
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    EXPECT_EQ(runs[i].length, eps + 1) << "run " << i;
    const int span = runs[i + 1].start - (runs[i].start + runs[i].length - 1);
    EXPECT_NEAR(span, swing * fc, 1.0) << "half-cycle " << i;
  }
  // Signs alternate between half-cycles.
  for (std::size_t i = 0; i + 2 < runs.size(); ++i) {
    const double a = v[runs[i].start + runs[i].length + 1];
    const double b = v[runs[i + 1].start + runs[i + 1].length + 1];
    EXPECT_LT(a * b, 0.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Planner, ZeroSet,
                         ::testing::Combine(::testing::Values(0, 1, 8),
                                            ::testing::Values(0.4, 0.25, 0.2, 0.13)));

TEST(AdvanceDrive, ZeroStanceNeverHolds) {
  DriveState s;
  s.swing_duration = 0.4;
  for (int t = 0; t < 200; ++t) {
    const DriveState n = AdvanceDrive(s, 100.0);
    EXPECT_GT(n.phase, s.phase);
    EXPECT_EQ(n.stance_counter, 0);
    s = n;
  }
}

TEST(AdvanceDrive, MidSwingChangeTakesEffectNextTick) {
  DriveState s;
  s.swing_duration = 0.4;
  for (int t = 0; t < 10; ++t) s = AdvanceDrive(s, 100.0);
  const double before = s.phase;
  s.swing_duration = 0.2;
  s = AdvanceDrive(s, 100.0);
  EXPECT_NEAR(s.phase - before, M_PI / 20.0, 1e-15);
}

// ---------------------------------------------------------------------------

// Prewarped analog prototype: |H| = 1 / sqrt(1 + (w / wc)^4) with
// w = tan(pi f / fs).
double AnalogMagnitude(double f, double fc, double fs) {
  const double r = std::tan(M_PI * f / fs) / std::tan(M_PI * fc / fs);
  return 1.0 / std::sqrt(1.0 + std::pow(r, 4));
}

TEST(Butterworth, UnityDcGain) {
  for (double fs : {100.0, 400.0, 1000.0}) {
    const auto c = ButterworthFilter::Design(10.0, fs);
    EXPECT_NEAR((c.b0 + c.b1 + c.b2) / (1.0 + c.a1 + c.a2), 1.0, 1e-12);
  }
}

TEST(Butterworth, MatchesPrewarpedPrototype) {
  const double fs = 400.0;
  const auto c = ButterworthFilter::Design(10.0, fs);
  for (double f : {0.5, 3.0, 10.0, 25.0, 100.0, 180.0}) {
    EXPECT_NEAR(ButterworthFilter::Magnitude(c, f, fs), AnalogMagnitude(f, 10.0, fs), 1e-12) << f;
  }
}

// Steady-state amplitude ratio of a simulated sinusoid, in dB.
double MeasuredGainDb(double f, double fs) {
  ButterworthFilter filter(10.0, fs, 1);
  const int settle = static_cast<int>(2 * fs), measure = static_cast<int>(fs);
  double peak = 0.0;
  for (int t = 0; t < settle + measure; ++t) {
    Eigen::VectorXd x(1);
    x(0) = std::sin(2 * M_PI * f * t / fs);
    const double y = filter.Step(x)(0);
    if (t >= settle) peak = std::max(peak, std::abs(y));
  }
  return 20.0 * std::log10(peak);
}

TEST(Butterworth, CutoffIsMinusThreeDb) {
  EXPECT_NEAR(MeasuredGainDb(10.0, 400.0), -3.0103, 0.5);
  EXPECT_NEAR(MeasuredGainDb(10.0, 100.0), -3.0103, 0.5);
}

TEST(Butterworth, HundredHertzAttenuation) { EXPECT_LE(MeasuredGainDb(100.0, 400.0), -35.0); }

TEST(Butterworth, PrimedConstantPassesUnchanged) {
  ButterworthFilter filter(10.0, 100.0, 3);
  const Eigen::Vector3d c(1.5, -2.0, 0.25);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd y = filter.Step(c);
    ASSERT_NEAR((y - c).norm(), 0.0, 1e-12) << t;
  }
}

TEST(Butterworth, StepSettlesToNewValue) {
  ButterworthFilter filter(10.0, 100.0, 1);
  filter.Step(Eigen::VectorXd::Zero(1));
  double y = 0.0;
  for (int t = 0; t < 200; ++t) y = filter.Step(Eigen::VectorXd::Ones(1))(0);
  EXPECT_NEAR(y, 1.0, 1e-9);
}

TEST(Butterworth, ChannelMismatchThrows) {
  ButterworthFilter filter(10.0, 100.0, 2);
  EXPECT_THROW(filter.Step(Eigen::VectorXd::Zero(3)), Error);
}

// ---------------------------------------------------------------------------

VaeModel TinyModel() {
  VaeConfig c;
  c.window = 3;
  c.future = 1;
  c.contact_steps = 2;
  c.latent = 4;
  c.encoder_hidden = c.decoder_hidden = c.predictor_hidden = {8};
  Eigen::MatrixXd data = Eigen::MatrixXd::Random(kStateDim, 5);
  return VaeModel::Create(c, NormalizationStats::Compute(data));
}

TEST(Planner, NullModelThrows) {
  try {
    Planner p(nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kModelMissing);
  }
}

TEST(Planner, OverwritesDriveDimensionAndAdvances) {
  const VaeModel model = TinyModel();
  PlannerOptions opt;
  opt.filter_enabled = false;
  Planner p(&model, opt);
  p.drive().amplitude = 2.0;
  p.drive().drive_dim = 2;
  p.drive().phase = M_PI / 2;
  const Eigen::VectorXd w = Eigen::VectorXd::Random(model.config.InputSize());
  const Eigen::Vector3d a(0.1, 0.0, -0.2);
  const PlanOutput out = p.Step(w, a);
  const Posterior post = Encode(model, w);
  Eigen::VectorXd z = post.mu;
  z(2) = 2.0;
  EXPECT_EQ(out.z_raw, z);
  EXPECT_EQ(out.z, z);
  EXPECT_DOUBLE_EQ(out.drive_value, 2.0);
  EXPECT_EQ(out.decoded, Decode(model, z, a));
  EXPECT_EQ(out.contacts, PredictContacts(model, z));
  EXPECT_DOUBLE_EQ(p.drive().phase, M_PI / 2 + PhaseIncrement(0.4, 100.0));
}

TEST(Planner, ElboUsesUnmodifiedMeanAndNewestState) {
  const VaeModel model = TinyModel();
  Planner p(&model);
  p.drive().amplitude = 3.0;
  p.drive().phase = 1.0;
  const Eigen::VectorXd w = Eigen::VectorXd::Random(model.config.InputSize());
  const Eigen::Vector3d a(0.0, 0.2, 0.0);
  const PlanOutput out = p.Step(w, a);
  const Posterior post = Encode(model, w);
  const int d = model.config.state_dim;
  const Eigen::VectorXd first = Decode(model, post.mu, a).head(d);
  const double mse = (first - w.tail(d)).squaredNorm() / d;
  double kl = 0.0;
  for (int i = 0; i < post.mu.size(); ++i) {
    kl += 0.5 * (std::exp(post.logvar(i)) + post.mu(i) * post.mu(i) - 1.0 - post.logvar(i));
  }
  EXPECT_NEAR(out.elbo_mse, mse, 1e-12);
  EXPECT_NEAR(out.elbo_kl, kl, 1e-12);
  EXPECT_NEAR(out.elbo, mse + kl, 1e-12);
}

TEST(Planner, DeterministicForIdenticalInputs) {
  const VaeModel model = TinyModel();
  Planner a(&model), b(&model);
  a.drive().amplitude = b.drive().amplitude = 1.0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(model.config.InputSize(), 0.01 * t);
    const PlanOutput x = a.Step(w, Eigen::Vector3d::Zero());
    const PlanOutput y = b.Step(w, Eigen::Vector3d::Zero());
    ASSERT_EQ(x.z, y.z);
    ASSERT_EQ(x.decoded, y.decoded);
    ASSERT_EQ(x.elbo, y.elbo);
  }
}

TEST(Planner, DriveDimensionOutOfRangeThrows) {
  const VaeModel model = TinyModel();
  Planner p(&model);
  p.drive().drive_dim = 4;
  EXPECT_THROW(p.Step(Eigen::VectorXd::Zero(model.config.InputSize()), Eigen::Vector3d::Zero()),
               Error);
}

// ---------------------------------------------------------------------------

TEST(Calibrate, MaxTimesMargin) {
  std::vector<double> v(6000, 3.0);
  v[1234] = 8.8;
  EXPECT_NEAR(CalibrateThreshold(v, 100.0), 11.0, 1e-12);
  EXPECT_EQ(CalibrateThreshold(v, 100.0, 1.0), 8.8);
}

TEST(Calibrate, NeedsSixtySeconds) {
  for (std::size_t n : {0ul, 5999ul}) {
    try {
      CalibrateThreshold(std::vector<double>(n, 1.0), 100.0);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
    }
  }
}

TEST(ElboMonitor, CrossingIsReportedOnce) {
  ElboMonitor m(10.0);
  EXPECT_FALSE(m.Update(5.0, 0.01));
  EXPECT_TRUE(m.Update(12.0, 0.01));
  EXPECT_FALSE(m.Update(13.0, 0.01));
  EXPECT_TRUE(m.above());
  EXPECT_FALSE(m.Update(9.0, 0.01));
  EXPECT_NEAR(m.time_below(), 0.01, 1e-15);
  EXPECT_TRUE(m.Update(10.5, 0.01));
}

struct CadenceTrace {
  std::vector<double> swing;
  std::vector<PlannerEvent> events;
};

// ELBO is 1 except at the listed spike ticks (value 20); theta = 10.
CadenceTrace RunCadence(double nominal, const std::vector<int>& spikes, int ticks) {
  CadenceOptions o;
  o.nominal_swing = nominal;
  CadenceResponse c(o);
  ElboMonitor m(10.0);
  DriveState d;
  d.swing_duration = nominal;
  CadenceTrace tr;
  for (int t = 0; t < ticks; ++t) {
    const bool spike = std::find(spikes.begin(), spikes.end(), t) != spikes.end();
    const bool crossed = m.Update(spike ? 20.0 : 1.0, 0.01);
    c.Update(m, crossed, t, 0.01, &d, &tr.events);
    tr.swing.push_back(d.swing_duration);
  }
  return tr;
}

int FirstEvent(const CadenceTrace& tr, EventKind kind) {
  for (const auto& e : tr.events) {
    if (e.kind == kind) return e.tick;
  }
  return -1;
}

TEST(Cadence, BelowThresholdLeavesDriveUnchanged) {
  const CadenceTrace tr = RunCadence(0.25, {}, 500);
  for (double s : tr.swing) EXPECT_EQ(s, 0.25);
  EXPECT_TRUE(tr.events.empty());
}

TEST(Cadence, SpikeHalvesSwingOverRamp) {
  const CadenceTrace tr = RunCadence(0.25, {10}, 400);
  EXPECT_EQ(FirstEvent(tr, EventKind::kDisturbanceDetected), 10);
  EXPECT_EQ(FirstEvent(tr, EventKind::kCadenceRamp), 10);
  // Linear: 0.125 s over 1.5 s is 1/1200 s per tick.
  EXPECT_NEAR(tr.swing[10 + 75], 0.25 - 76 * 0.125 / 150.0, 1e-12);
  EXPECT_NEAR(tr.swing[10 + 149], 0.125, 1e-12);
  EXPECT_GT(tr.swing[10 + 148], 0.125);
  // Held while the recovery timer runs.
  EXPECT_EQ(tr.swing[10 + 199], 0.125);
}

TEST(Cadence, RampsBackAfterHold) {
  const CadenceTrace tr = RunCadence(0.25, {10}, 800);
  const int rec = FirstEvent(tr, EventKind::kRecovered);
  EXPECT_EQ(rec, 10 + 200);
  EXPECT_NEAR(tr.swing.back(), 0.25, 1e-12);
}

TEST(Cadence, SecondSpikeRestartsRecoveryTimer) {
  const CadenceTrace tr = RunCadence(0.25, {10, 60}, 800);
  EXPECT_EQ(FirstEvent(tr, EventKind::kRecovered), 60 + 200);
  // No ramp back before the second timer expires.
  for (int t = 10 + 149; t < 260; ++t) EXPECT_EQ(tr.swing[t], 0.125) << t;
  int detections = 0;
  for (const auto& e : tr.events) detections += e.kind == EventKind::kDisturbanceDetected;
  EXPECT_EQ(detections, 2);
}

TEST(Cadence, MinimumSwingBoundsTheTarget) {
  CadenceOptions o;
  o.nominal_swing = 0.15;
  o.min_swing = 0.1;
  EXPECT_EQ(CadenceResponse(o).target_swing(), 0.1);
}

TEST(Cadence, DisabledStillReportsEvents) {
  CadenceOptions o;
  o.enabled = false;
  o.nominal_swing = 0.4;
  CadenceResponse c(o);
  ElboMonitor m(10.0);
  DriveState d;
  std::vector<PlannerEvent> ev;
  const bool crossed = m.Update(11.0, 0.01);
  c.Update(m, crossed, 0, 0.01, &d, &ev);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, EventKind::kDisturbanceDetected);
  EXPECT_EQ(d.swing_duration, 0.4);
}

}  // namespace
}  // namespace latent_gait
