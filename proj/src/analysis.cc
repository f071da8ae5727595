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

#include "latent_gait/analysis.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "latent_gait/error.h"
#include "latent_gait/trainer.h"

namespace latent_gait {
namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kDecisiveRange = 0.5;

Eigen::MatrixXd Sigmoid(const Eigen::MatrixXd& logits) {
  return (1.0 + (-logits.array()).exp()).inverse().matrix();
}

double Percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

bool IsSwing(GaitPhase p) { return p == GaitPhase::kSwingLfRh || p == GaitPhase::kSwingRfLh; }

// Pattern index: 0 full, 1 LF+RH swing, 2 RF+LH swing, 3 anything else.
int PatternIndex(const ContactState& c) {
  bool ok = false;
  const GaitPhase p = StancePattern(c, &ok);
  if (!ok) return 3;
  if (p == GaitPhase::kSwingLfRh) return 1;
  if (p == GaitPhase::kSwingRfLh) return 2;
  return 0;
}

std::complex<double> Coefficient(const Eigen::Ref<const Eigen::VectorXd>& series, double sample_hz,
                                 double freq_hz) {
  const double mean = series.mean();
  std::complex<double> c = 0.0;
  for (Eigen::Index t = 0; t < series.size(); ++t) {
    const double w = kTwoPi * freq_hz * t / sample_hz;
    c += (series(t) - mean) * std::complex<double>(std::cos(w), -std::sin(w));
  }
  return c;
}

nlohmann::json VectorJson(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

// ---------------------------------------------------------------------------

EncodedTrajectory EncodeTrajectory(const VaeModel& model, const Trajectory& trajectory) {
  const VaeConfig& cfg = model.config;
  const int first = cfg.HistoryTicks();
  const int n = trajectory.size() - first;
  EncodedTrajectory out;
  out.first_tick = first;
  out.mu.resize(cfg.latent, std::max(n, 0));
  out.logvar.resize(cfg.latent, std::max(n, 0));
  constexpr int kChunk = 512;
  for (int start = 0; start < n; start += kChunk) {
    const int count = std::min(kChunk, n - start);
    Eigen::MatrixXd windows(cfg.InputSize(), count);
    for (int i = 0; i < count; ++i) {
      windows.col(i) = BuildWindow(trajectory.states, first + start + i, cfg, model.stats);
    }
    const Eigen::MatrixXd enc = model.encoder.Forward(windows);
    out.mu.middleCols(start, count) = enc.topRows(cfg.latent);
    out.logvar.middleCols(start, count) = enc.bottomRows(cfg.latent);
  }
  return out;
}

std::vector<double> SchedulePhase(const Trajectory& trajectory, const GaitParams& gait) {
  const int swing = gait.SwingTicks();
  std::vector<double> phase(trajectory.phases.size(), 0.0);
  int offset = 0;
  for (std::size_t t = 0; t < phase.size(); ++t) {
    const GaitPhase p = trajectory.phases[t];
    offset = (t > 0 && trajectory.phases[t - 1] == p) ? offset + 1 : 0;
    const double s = std::min(1.0, (offset + 1.0) / swing);
    switch (p) {
      case GaitPhase::kFullA:
        phase[t] = 0.0;
        break;
      case GaitPhase::kSwingLfRh:
        phase[t] = M_PI * s;
        break;
      case GaitPhase::kFullB:
        phase[t] = M_PI;
        break;
      case GaitPhase::kSwingRfLh:
        phase[t] = M_PI + M_PI * s;
        break;
    }
    if (phase[t] >= kTwoPi) phase[t] = 0.0;
  }
  return phase;
}

Harmonic HarmonicAt(const Eigen::Ref<const Eigen::VectorXd>& series, double sample_hz,
                    double freq_hz) {
  Harmonic h;
  const Eigen::Index n = series.size();
  if (n == 0) return h;
  const std::complex<double> c = Coefficient(series, sample_hz, freq_hz);
  const double energy = (series.array() - series.mean()).square().sum();
  h.amplitude = 2.0 * std::abs(c) / n;
  h.phase = std::arg(c);
  h.power_fraction = energy > 0.0 ? std::min(1.0, 2.0 * std::norm(c) / (n * energy)) : 0.0;
  return h;
}

// ---------------------------------------------------------------------------

nlohmann::json InjectionProbe::ToJson() const {
  return {{"dim", dim},
          {"amplitude", amplitude},
          {"period", period},
          {"cycles", cycles},
          {"flips", flips},
          {"cycles_with_both_swings", cycles_with_both_swings},
          {"modulation", modulation},
          {"joint_range", joint_range},
          {"foot_height", foot_height},
          {"step_length", step_length},
          {"contact_period", contact_period},
          {"periodic", periodic}};
}

InjectionProbe LatentInjectionProbe(const VaeModel& model, const Eigen::VectorXd& base, int dim,
                                    double amplitude, double period, const Eigen::Vector3d& action,
                                    int cycles) {
  const VaeConfig& cfg = model.config;
  if (dim < 0 || dim >= cfg.latent || base.size() != cfg.latent) {
    throw Error(ErrorCode::kShapeMismatch, "probe dimension or base size");
  }
  const double fs = cfg.control_frequency;
  const int per_cycle = std::max(1, static_cast<int>(std::lround(period * fs)));
  const int n = per_cycle * cycles;
  Eigen::MatrixXd z = base.replicate(1, n);
  for (int t = 0; t < n; ++t) z(dim, t) += amplitude * std::sin(kTwoPi * t / (period * fs));
  Eigen::MatrixXd dec_in(cfg.latent + 3, n);
  dec_in << z, action.replicate(1, n);
  Eigen::MatrixXd first = model.decoder.Forward(dec_in).topRows(cfg.state_dim);
  model.stats.DestandardizeColumns(first);
  const Eigen::MatrixXd probs = Sigmoid(model.predictor.Forward(z).topRows(kNumLegs));

  InjectionProbe p;
  p.dim = dim;
  p.amplitude = amplitude;
  p.period = period;
  p.cycles = cycles;
  std::vector<int> pattern(n);
  std::vector<ContactState> contacts(n);
  for (int t = 0; t < n; ++t) {
    contacts[t] = EstimateContacts(probs.col(t));
    pattern[t] = PatternIndex(contacts[t]);
    if (t > 0 && contacts[t] != contacts[t - 1]) ++p.flips;
  }
  for (int c = 0; c < cycles; ++c) {
    bool a = false, b = false;
    for (int t = c * per_cycle; t < (c + 1) * per_cycle; ++t) {
      a |= pattern[t] == 1;
      b |= pattern[t] == 2;
    }
    // Every foot has to be lifted and planted with some confidence.
    const Eigen::MatrixXd block = probs.middleCols(c * per_cycle, per_cycle);
    const bool decisive =
        ((block.rowwise().maxCoeff() - block.rowwise().minCoeff()).array() >= kDecisiveRange).all();
    p.cycles_with_both_swings += a && b && decisive;
  }
  p.periodic = p.cycles_with_both_swings == cycles;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Eigen::ArrayXd row = probs.row(leg).transpose().array();
    p.modulation += std::sqrt((row - row.mean()).square().mean());
    p.foot_height = std::max(p.foot_height, first.row(kFootOffset + 3 * leg + 2).maxCoeff() -
                                                first.row(kFootOffset + 3 * leg + 2).minCoeff());
    p.step_length = std::max(p.step_length, first.row(kFootOffset + 3 * leg).maxCoeff() -
                                                first.row(kFootOffset + 3 * leg).minCoeff());
  }
  for (int j = 0; j < kNumJoints; ++j) {
    p.joint_range = std::max(p.joint_range, first.row(kJointOffset + j).maxCoeff() -
                                                first.row(kJointOffset + j).minCoeff());
  }
  std::vector<int> onsets;
  for (int t = 1; t < n; ++t) {
    if (pattern[t] == 1 && pattern[t - 1] != 1) onsets.push_back(t);
  }
  if (onsets.size() >= 2) {
    p.contact_period = (onsets.back() - onsets.front()) / (fs * (onsets.size() - 1));
  }
  return p;
}

DriveIdentification DriveIdentification::FromJson(const nlohmann::json& j) {
  DriveIdentification id;
  try {
    id.drive_dim = j.at("drive_dim").get<int>();
    id.trot_dim = j.at("trot_dim").get<int>();
    id.gait_frequency = j.value("gait_frequency", 0.0);
    id.phase_offset = j.value("phase_offset", 0.0);
    id.amplitude = j.at("amplitude").get<double>();
    id.center = j.value("center", 0.0);
    id.trot_split = j.value("trot_split", 0.0);
    id.full_a_sign = j.value("full_a_sign", 1.0);
    auto vec = [&](const char* key) {
      const auto v = j.value(key, std::vector<double>{});
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
    };
    id.latent_mean = vec("latent_mean");
    id.latent_std = vec("latent_std");
    id.posterior_variance = vec("posterior_variance");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("drive identification: ") + e.what());
  }
  return id;
}

nlohmann::json DriveIdentification::ToJson() const {
  nlohmann::json harm = nlohmann::json::array();
  for (const auto& h : harmonics) {
    harm.push_back(
        {{"power_fraction", h.power_fraction}, {"phase", h.phase}, {"amplitude", h.amplitude}});
  }
  nlohmann::json pr = nlohmann::json::array();
  for (const auto& p : probes) pr.push_back(p.ToJson());
  std::vector<int> by_std(latent_std.size()), by_post(posterior_variance.size());
  std::iota(by_std.begin(), by_std.end(), 0);
  std::iota(by_post.begin(), by_post.end(), 0);
  std::sort(by_std.begin(), by_std.end(),
            [&](int a, int b) { return latent_std(a) < latent_std(b); });
  std::sort(by_post.begin(), by_post.end(),
            [&](int a, int b) { return posterior_variance(a) < posterior_variance(b); });
  return {{"drive_dim", drive_dim},
          {"trot_dim", trot_dim},
          {"gait_frequency", gait_frequency},
          {"phase_offset", phase_offset},
          {"amplitude", amplitude},
          {"center", center},
          {"trot_split", trot_split},
          {"full_a_sign", full_a_sign},
          {"latent_mean", VectorJson(latent_mean)},
          {"latent_std", VectorJson(latent_std)},
          {"posterior_variance", VectorJson(posterior_variance)},
          {"rank_smallest_mu_variance", by_std},
          {"rank_smallest_posterior_variance", by_post},
          {"harmonics", harm},
          {"probes", pr}};
}

DriveIdentification IdentifyDriveDimension(const VaeModel& model, const Dataset& dataset,
                                           const std::vector<int>& trajectories) {
  const VaeConfig& cfg = model.config;
  const int L = cfg.latent;
  const double fs = cfg.control_frequency;
  const GaitParams& gait = dataset.config.gait;
  DriveIdentification id;
  id.gait_frequency = 1.0 / (2.0 * (gait.swing_duration + gait.stance_duration));

  std::vector<EncodedTrajectory> enc;
  std::vector<std::vector<GaitPhase>> phases;
  Eigen::Index total = 0;
  for (int t : trajectories) {
    const Trajectory& tr = dataset.trajectories.at(t);
    enc.push_back(EncodeTrajectory(model, tr));
    phases.emplace_back(tr.phases.begin() + enc.back().first_tick, tr.phases.end());
    total += enc.back().mu.cols();
  }
  if (total < 2) throw Error(ErrorCode::kInsufficientData, "no encodable windows");

  Eigen::MatrixXd mu(L, total);
  id.posterior_variance = Eigen::VectorXd::Zero(L);
  std::vector<GaitPhase> labels;
  labels.reserve(total);
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    mu.middleCols(col, enc[i].mu.cols()) = enc[i].mu;
    id.posterior_variance += enc[i].logvar.array().exp().matrix().rowwise().sum();
    labels.insert(labels.end(), phases[i].begin(), phases[i].end());
    col += enc[i].mu.cols();
  }
  id.posterior_variance /= static_cast<double>(total);
  id.latent_mean = mu.rowwise().mean();
  id.latent_std =
      ((mu.colwise() - id.latent_mean).array().square().rowwise().mean()).sqrt().matrix();

  // Spectral coefficients per trajectory, kept complex for phase comparisons.
  std::vector<std::vector<std::complex<double>>> coef(enc.size(),
                                                      std::vector<std::complex<double>>(L));
  id.harmonics.assign(L, Harmonic{});
  for (int d = 0; d < L; ++d) {
    double weight = 0.0;
    for (std::size_t i = 0; i < enc.size(); ++i) {
      const Eigen::VectorXd series = enc[i].mu.row(d).transpose();
      coef[i][d] = Coefficient(series, fs, id.gait_frequency);
      const Harmonic h = HarmonicAt(series, fs, id.gait_frequency);
      id.harmonics[d].power_fraction += h.power_fraction * series.size();
      id.harmonics[d].amplitude += h.amplitude * series.size();
      weight += series.size();
    }
    id.harmonics[d].power_fraction /= weight;
    id.harmonics[d].amplitude /= weight;
    id.harmonics[d].phase = std::arg(coef[0][d]);
  }

  const double period = 1.0 / id.gait_frequency;
  for (int d = 0; d < L; ++d) {
    std::vector<double> dev(total);
    for (Eigen::Index t = 0; t < total; ++t) dev[t] = std::abs(mu(d, t) - id.latent_mean(d));
    const double amp = Percentile(dev, 0.99);
    id.probes.push_back(
        LatentInjectionProbe(model, id.latent_mean, d, amp, period, Eigen::Vector3d::Zero()));
  }
  int best = -1;
  for (int d = 0; d < L; ++d) {
    if (id.probes[d].periodic &&
        (best < 0 || id.probes[d].modulation > id.probes[best].modulation)) {
      best = d;
    }
  }
  if (best < 0) {
    throw Error(ErrorCode::kNoPeriodicDimension,
                "no single-dimension injection alternates both diagonal swings");
  }
  id.drive_dim = best;
  for (int d = 0; d < L; ++d) {
    if (d == best) continue;
    if (id.trot_dim < 0 || id.probes[d].modulation > id.probes[id.trot_dim].modulation) {
      id.trot_dim = d;
    }
  }
  if (id.trot_dim >= 0) {
    std::complex<double> cross = 0.0;
    for (std::size_t i = 0; i < enc.size(); ++i) {
      cross += coef[i][id.trot_dim] * std::conj(coef[i][best]);
    }
    id.phase_offset = std::abs(std::arg(cross));
  }

  double sum_a = 0, sum_b = 0, fa = 0, fb = 0;
  int n_a = 0, n_b = 0, nf_a = 0, nf_b = 0;
  std::vector<double> peak;
  for (Eigen::Index t = 0; t < total; ++t) {
    const double v = mu(best, t);
    if (labels[t] == GaitPhase::kSwingLfRh) {
      sum_a += v;
      ++n_a;
    }
    if (labels[t] == GaitPhase::kSwingRfLh) {
      sum_b += v;
      ++n_b;
    }
    if (IsSwing(labels[t])) peak.push_back(v);
    if (id.trot_dim >= 0 && labels[t] == GaitPhase::kFullA) {
      fa += mu(id.trot_dim, t);
      ++nf_a;
    }
    if (id.trot_dim >= 0 && labels[t] == GaitPhase::kFullB) {
      fb += mu(id.trot_dim, t);
      ++nf_b;
    }
  }
  const double mean_a = n_a ? sum_a / n_a : 0.0;
  const double mean_b = n_b ? sum_b / n_b : 0.0;
  const double hi = Percentile(peak, 0.99), lo = Percentile(peak, 0.01);
  id.center = 0.5 * (hi + lo);
  const double sign = mean_a >= mean_b ? 1.0 : -1.0;
  id.amplitude = sign * (sign > 0 ? hi : -lo);
  if (nf_a > 0 && nf_b > 0) {
    const double ma = fa / nf_a, mb = fb / nf_b;
    id.trot_split = 0.5 * (ma + mb);
    id.full_a_sign = ma >= mb ? 1.0 : -1.0;
  }
  return id;
}

// ---------------------------------------------------------------------------

GaitPhase ClassifyStance(const Eigen::Ref<const Eigen::VectorXd>& probabilities, double trot_value,
                         const DriveIdentification& id) {
  constexpr double kEps = 1e-12;
  const std::array<GaitPhase, 3> candidates = {GaitPhase::kFullA, GaitPhase::kSwingLfRh,
                                               GaitPhase::kSwingRfLh};
  GaitPhase best = GaitPhase::kFullA;
  double best_ll = -1e300;
  for (GaitPhase c : candidates) {
    const ContactState pattern = PhaseContacts(c);
    double ll = 0.0;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const double p = std::clamp(probabilities(leg), kEps, 1.0 - kEps);
      ll += pattern[leg] ? std::log(p) : std::log(1.0 - p);
    }
    if (ll > best_ll) {
      best_ll = ll;
      best = c;
    }
  }
  if (best == GaitPhase::kFullA && (trot_value - id.trot_split) * id.full_a_sign < 0.0) {
    best = GaitPhase::kFullB;
  }
  return best;
}

int LatentClusterMap::DistinctLabels() const {
  std::array<bool, 4> seen{};
  for (const auto& p : points) seen[static_cast<int>(p.label)] = true;
  return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

void LatentClusterMap::WriteCsv(std::ostream& out) const {
  out << "u,v,p_LF,p_RF,p_LH,p_RH,label";
  const int latent = points.empty() ? 0 : static_cast<int>(points.front().z.size());
  for (int i = 0; i < latent; ++i) out << ",z" << i;
  out << "\n";
  for (const auto& p : points) {
    out << p.u << "," << p.v;
    for (int leg = 0; leg < kNumLegs; ++leg) out << "," << p.probabilities(leg);
    out << "," << GaitPhaseName(p.label);
    for (Eigen::Index i = 0; i < p.z.size(); ++i) out << "," << p.z(i);
    out << "\n";
  }
}

LatentClusterMap ClusterMapSamples(const VaeModel& model, const DriveIdentification& id,
                                   const Eigen::MatrixXd& z) {
  if (id.drive_dim < 0 || id.trot_dim < 0 || id.drive_dim == id.trot_dim) {
    throw Error(ErrorCode::kInvalidParams, "cluster map needs two distinct slice axes");
  }
  LatentClusterMap map;
  map.axis_u = id.drive_dim;
  map.axis_v = id.trot_dim;
  const Eigen::MatrixXd probs = Sigmoid(model.predictor.Forward(z).topRows(kNumLegs));
  map.points.reserve(z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    ClusterPoint p;
    p.z = z.col(c);
    p.u = p.z(map.axis_u);
    p.v = p.z(map.axis_v);
    p.probabilities = probs.col(c);
    p.label = ClassifyStance(p.probabilities, p.v, id);
    map.points.push_back(std::move(p));
  }
  return map;
}

LatentClusterMap ClusterMapGrid(const VaeModel& model, const DriveIdentification& id,
                                const Eigen::VectorXd& base, int resolution, double u_extent,
                                double v_extent) {
  if (resolution < 2) throw Error(ErrorCode::kInvalidParams, "grid resolution below 2");
  Eigen::MatrixXd z = base.replicate(1, resolution * resolution);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const int c = i * resolution + j;
      z(id.drive_dim, c) = base(id.drive_dim) + u_extent * (2.0 * i / (resolution - 1) - 1.0);
      z(id.trot_dim, c) = base(id.trot_dim) + v_extent * (2.0 * j / (resolution - 1) - 1.0);
    }
  }
  return ClusterMapSamples(model, id, z);
}

std::vector<GaitPhase> CompressLabels(const std::vector<GaitPhase>& labels, int min_run) {
  std::vector<GaitPhase> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    if (static_cast<int>(j - i) >= min_run && (out.empty() || out.back() != labels[i])) {
      out.push_back(labels[i]);
    }
    i = j;
  }
  return out;
}

bool FollowsTrotOrder(const std::vector<GaitPhase>& sequence) {
  std::array<bool, 4> seen{};
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    seen[static_cast<int>(sequence[i])] = true;
    if (i > 0 && static_cast<int>(sequence[i]) != (static_cast<int>(sequence[i - 1]) + 1) % 4) {
      return false;
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

// ---------------------------------------------------------------------------

std::vector<Eigen::VectorXd> PhaseTargets(const VaeModel& model, const Dataset& dataset,
                                          const std::vector<int>& trajectories,
                                          const std::vector<double>& phases) {
  const int L = model.config.latent;
  std::vector<Eigen::VectorXd> sums(phases.size(), Eigen::VectorXd::Zero(L));
  std::vector<int> counts(phases.size(), 0);
  const double tol = 0.5 * M_PI / dataset.config.gait.SwingTicks() + 1e-9;
  for (int t : trajectories) {
    const Trajectory& tr = dataset.trajectories.at(t);
    const EncodedTrajectory enc = EncodeTrajectory(model, tr);
    const std::vector<double> ph = SchedulePhase(tr, dataset.config.gait);
    for (Eigen::Index c = 0; c < enc.mu.cols(); ++c) {
      const double p = ph[enc.first_tick + c];
      for (std::size_t k = 0; k < phases.size(); ++k) {
        const double d = std::abs(std::remainder(p - phases[k], kTwoPi));
        if (d <= tol) {
          sums[k] += enc.mu.col(c);
          ++counts[k];
        }
      }
    }
  }
  for (std::size_t k = 0; k < phases.size(); ++k) {
    if (counts[k] == 0) {
      throw Error(ErrorCode::kInsufficientData, "no window at phase " + std::to_string(phases[k]));
    }
    sums[k] /= counts[k];
  }
  return sums;
}

SaliencyResult SaliencyMap(const VaeModel& model, const Eigen::VectorXd& target,
                           const SaliencyOptions& options) {
  const VaeConfig& cfg = model.config;
  if (target.size() != cfg.latent) throw Error(ErrorCode::kShapeMismatch, "target size");
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, options.init_scale);
  Eigen::VectorXd x(cfg.InputSize());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);

  SaliencyResult r;
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(x.size());
  Mlp scratch = model.encoder;
  Eigen::VectorXd g;
  auto evaluate = [&](double* loss) {
    Mlp::Cache cache;
    const Eigen::MatrixXd out = model.encoder.Forward(x, &cache);
    const Eigen::VectorXd diff = out.col(0).head(cfg.latent) - target;
    *loss = diff.squaredNorm();
    Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(out.rows(), 1);
    grad_out.col(0).head(cfg.latent) = 2.0 * diff;
    Eigen::MatrixXd grad_in;
    scratch.SetZero();
    model.encoder.Backward(cache, grad_out, &scratch, &grad_in);
    g = grad_in.col(0);
  };
  double loss = 0.0;
  evaluate(&loss);
  r.initial_loss = loss;
  r.initial_grad_norm = g.norm();
  for (int step = 0; step < options.steps; ++step) {
    accum += g.cwiseAbs();
    x -= options.learning_rate * g;
    evaluate(&loss);
  }
  r.final_loss = loss;
  r.final_grad_norm = g.norm();
  r.map = Eigen::Map<const Eigen::MatrixXd>(accum.data(), cfg.state_dim, cfg.window).transpose();
  const std::array<int, 7> bounds = {kJointOffset, kFootOffset,      kTorqueOffset, kForceOffset,
                                     kTwistOffset, kDeltaPoseOffset, kStateDim};
  for (int k = 0; k < 6; ++k) {
    r.groups[k] = r.map.middleCols(bounds[k], bounds[k + 1] - bounds[k]).sum();
  }
  return r;
}

// ---------------------------------------------------------------------------

double ZmpSummary::fraction_below(double bound) const {
  if (records.empty()) return 0.0;
  const auto n = std::count_if(records.begin(), records.end(),
                               [&](const ZmpRecord& r) { return std::abs(r.distance) < bound; });
  return static_cast<double>(n) / records.size();
}

std::vector<Eigen::Vector2d> SmoothedBaseAcceleration(const Eigen::MatrixXd& states,
                                                      double sample_hz, int smoothing) {
  const Eigen::Index n = states.cols();
  std::vector<Eigen::Vector2d> raw(n, Eigen::Vector2d::Zero());
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::Index a = t == 0 ? 0 : t - 1;
    const Eigen::Index b = t == 0 ? std::min<Eigen::Index>(1, n - 1) : t;
    raw[t] =
        (states.block<2, 1>(kTwistOffset, b) - states.block<2, 1>(kTwistOffset, a)) * sample_hz;
  }
  const int half = std::max(0, smoothing / 2);
  std::vector<Eigen::Vector2d> out(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, t + half);
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    for (Eigen::Index k = lo; k <= hi; ++k) s += raw[k];
    out[t] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

ZmpSummary ZmpSupportDistance(const Eigen::MatrixXd& states,
                              const std::vector<ContactState>& contacts, double sample_hz,
                              const RobotDescription& robot, int smoothing) {
  if (static_cast<Eigen::Index>(contacts.size()) != states.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "contact log and state log differ in length");
  }
  const std::vector<Eigen::Vector2d> accel = SmoothedBaseAcceleration(states, sample_hz, smoothing);
  ZmpSummary s;
  std::vector<double> abs_d;
  for (Eigen::Index t = 0; t < states.cols(); ++t) {
    const ContactState& c = contacts[t];
    int front, hind;
    if (c[0] && c[3] && !c[1] && !c[2]) {
      front = 0, hind = 3;
    } else if (c[1] && c[2] && !c[0] && !c[3]) {
      front = 1, hind = 2;
    } else {
      continue;
    }
    ZmpRecord r;
    r.tick = static_cast<int>(t);
    const Eigen::Vector3d pf = states.block<3, 1>(kFootOffset + 3 * front, t);
    const Eigen::Vector3d ph = states.block<3, 1>(kFootOffset + 3 * hind, t);
    const double height = -0.5 * (pf.z() + ph.z());
    r.front = pf.head<2>();
    r.hind = ph.head<2>();
    r.zmp = -(height / robot.gravity) * accel[t];
    const Eigen::Vector2d u = r.front - r.hind;
    const Eigen::Vector2d w = r.zmp - r.hind;
    const double len = u.norm();
    if (len <= 0.0) continue;
    r.distance = (u.x() * w.y() - u.y() * w.x()) / len;
    abs_d.push_back(std::abs(r.distance));
    s.mean += r.distance;
    s.records.push_back(r);
  }
  if (!s.records.empty()) {
    s.mean /= s.records.size();
    s.p95_abs = Percentile(abs_d, 0.95);
    s.max_abs = *std::max_element(abs_d.begin(), abs_d.end());
  }
  return s;
}

// ---------------------------------------------------------------------------

nlohmann::json BoxStats::ToJson() const {
  return {{"count", count}, {"min", min}, {"q1", q1},    {"median", median},
          {"q3", q3},       {"max", max}, {"mean", mean}};
}

BoxStats Summarize(std::vector<double> values) {
  BoxStats b;
  b.count = static_cast<int>(values.size());
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  b.min = values.front();
  b.max = values.back();
  b.q1 = Percentile(values, 0.25);
  b.median = Percentile(values, 0.5);
  b.q3 = Percentile(values, 0.75);
  b.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  return b;
}

GaitPhase StancePattern(const ContactState& c, bool* ok) {
  const bool diag_a = c[0] && c[3];  // LF, RH down
  const bool diag_b = c[1] && c[2];  // RF, LH down
  *ok = true;
  if (diag_a && diag_b) return GaitPhase::kFullA;
  if (diag_b) return GaitPhase::kSwingLfRh;
  if (diag_a) return GaitPhase::kSwingRfLh;
  *ok = false;
  return GaitPhase::kFullA;
}

nlohmann::json GaitTiming::ToJson() const {
  return {{"cycles", cycles},
          {"other_ticks", other_ticks},
          {"swing", swing_stats.ToJson()},
          {"stance", stance_stats.ToJson()},
          {"swing_samples", swing},
          {"stance_samples", stance}};
}

GaitTiming GaitParamDistribution(const std::vector<ContactState>& contacts, double sample_hz,
                                 int min_cycles) {
  struct Run {
    int pattern, start, length;
  };
  std::vector<Run> runs;
  for (int t = 0; t < static_cast<int>(contacts.size()); ++t) {
    const int p = PatternIndex(contacts[t]);
    if (!runs.empty() && runs.back().pattern == p) {
      ++runs.back().length;
    } else {
      runs.push_back({p, t, 1});
    }
  }
  GaitTiming g;
  bool seen_a = false;
  const auto swing = [](int p) { return p == 1 || p == 2; };
  for (int i = 1; i + 1 < static_cast<int>(runs.size()); ++i) {
    const Run& r = runs[i];
    const double secs = r.length / sample_hz;
    if (swing(r.pattern)) {
      g.swing.push_back(secs);
      g.swing_start_ticks.push_back(r.start);
      g.swing_end_ticks.push_back(r.start + r.length);
      if (r.pattern == 1) {
        seen_a = true;
      } else if (seen_a) {
        ++g.cycles;
        seen_a = false;
      }
      if (i + 2 < static_cast<int>(runs.size()) && swing(runs[i + 1].pattern) &&
          runs[i + 1].pattern != r.pattern) {
        g.stance.push_back(0.0);
      }
    } else if (r.pattern == 0) {
      if (swing(runs[i - 1].pattern) && swing(runs[i + 1].pattern)) g.stance.push_back(secs);
    } else {
      g.other_ticks += r.length;
    }
  }
  g.swing_stats = Summarize(g.swing);
  g.stance_stats = Summarize(g.stance);
  if (g.cycles < min_cycles) {
    throw Error(ErrorCode::kInsufficientData,
                std::to_string(g.cycles) + " gait cycles, need " + std::to_string(min_cycles));
  }
  return g;
}

// ---------------------------------------------------------------------------

double StumpAccuracy(const std::vector<double>& values, const std::vector<bool>& labels) {
  const std::size_t n = values.size();
  if (n == 0 || labels.size() != n) throw Error(ErrorCode::kShapeMismatch, "stump inputs");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  const long positives = std::count(labels.begin(), labels.end(), true);
  // Predict "true" above the threshold; sweep thresholds between distinct values.
  long pos_below = 0;
  long best = std::max<long>(positives, n - positives);
  for (std::size_t i = 0; i < n; ++i) {
    pos_below += labels[order[i]];
    if (i + 1 < n && values[order[i + 1]] == values[order[i]]) continue;
    const long below = static_cast<long>(i + 1);
    const long correct = (below - pos_below) + (positives - pos_below);
    best = std::max({best, correct, static_cast<long>(n) - correct});
  }
  return static_cast<double>(best) / n;
}

double ThresholdStanceAccuracy(const VaeModel& model, const Dataset& dataset,
                               const std::vector<int>& trajectories, int dim) {
  if (dim < 0 || dim >= model.config.latent) {
    throw Error(ErrorCode::kInvalidParams, "latent dimension out of range");
  }
  std::vector<double> values;
  std::array<std::vector<bool>, kNumLegs> labels;
  for (int t : trajectories) {
    const Trajectory& tr = dataset.trajectories.at(t);
    const EncodedTrajectory enc = EncodeTrajectory(model, tr);
    for (Eigen::Index c = 0; c < enc.mu.cols(); ++c) {
      values.push_back(enc.mu(dim, c));
      for (int leg = 0; leg < kNumLegs; ++leg) {
        labels[leg].push_back(tr.contacts[enc.first_tick + c][leg]);
      }
    }
  }
  double acc = 0.0;
  for (int leg = 0; leg < kNumLegs; ++leg) acc += StumpAccuracy(values, labels[leg]);
  return acc / kNumLegs;
}

// ---------------------------------------------------------------------------

namespace {

// Midranks of the pooled sample, doubled so that they are integers.
std::vector<long> DoubledMidranks(const std::vector<double>& pooled, double* tie_term) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pooled[a] < pooled[b]; });
  std::vector<long> rank2(n);
  *tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && pooled[order[j]] == pooled[order[i]]) ++j;
    const long r2 = static_cast<long>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i);
    *tie_term += t * t * t - t;
    i = j;
  }
  return rank2;
}

}  // namespace

MannWhitneyResult MannWhitneyU(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptySample, "both samples need entries");
  const long n = static_cast<long>(a.size()), m = static_cast<long>(b.size());
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  double tie_term = 0.0;
  const std::vector<long> rank2 = DoubledMidranks(pooled, &tie_term);
  const long r2_a = std::accumulate(rank2.begin(), rank2.begin() + n, 0L);
  // 2U = 2R - n(n+1); deviation from the null mean, doubled.
  const long u2 = r2_a - n * (n + 1);
  const long dev2 = std::abs(u2 - n * m);
  MannWhitneyResult res;
  res.u = 0.5 * u2;
  if (n <= 20 && m <= 20) {
    res.exact = true;
    const long max_sum = std::accumulate(rank2.begin(), rank2.end(), 0L);
    // ways[k][s]: subsets of size k with doubled rank sum s.
    std::vector<std::vector<double>> ways(n + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (long r : rank2) {
      for (long k = n; k >= 1; --k) {
        for (long s = max_sum; s >= r; --s) ways[k][s] += ways[k - 1][s - r];
      }
    }
    double hit = 0.0, all = 0.0;
    for (long s = 0; s <= max_sum; ++s) {
      all += ways[n][s];
      if (std::abs(s - n * (n + 1) - n * m) >= dev2) hit += ways[n][s];
    }
    res.p_value = std::min(1.0, hit / all);
    return res;
  }
  const double big_n = static_cast<double>(n + m);
  const double var = n * m / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  const double z = std::max(0.0, 0.5 * dev2 - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

// ---------------------------------------------------------------------------

nlohmann::json GaitEvaluation::ToJson() const {
  return {{"diverged", diverged},    {"cycles", cycles},          {"sustained", sustained},
          {"swing", swing.ToJson()}, {"stance", stance.ToJson()}, {"note", note}};
}

GaitEvaluation EvaluateGait(const RunLog& log, int min_cycles) {
  GaitEvaluation e;
  e.diverged = log.diverged;
  const GaitTiming g = GaitParamDistribution(log.ContactLog(), log.control_frequency, 0);
  e.cycles = g.cycles;
  e.swing = g.swing_stats;
  e.stance = g.stance_stats;
  e.sustained = !e.diverged && e.cycles >= min_cycles;
  if (e.diverged) {
    e.note = "diverged at tick " + std::to_string(log.diverged_tick) + ": " + log.diverged_reason;
  } else if (!e.sustained) {
    e.note = std::to_string(e.cycles) + " cycles";
  }
  return e;
}

RunScript NominalScript(const DriveIdentification& id, double swing_duration, int ticks,
                        int stance_ticks) {
  RunScript s;
  s.drive.drive_dim = id.drive_dim;
  s.drive.amplitude = id.amplitude;
  s.drive.swing_duration = swing_duration;
  s.drive.stance_ticks = stance_ticks;
  s.duration_ticks = ticks;
  return s;
}

Eigen::MatrixXd DatasetPrefill(const Dataset& dataset, int trajectory, int start_tick,
                               const VaeConfig& config) {
  const Trajectory& tr = dataset.trajectories.at(trajectory);
  const int h = config.HistoryTicks();
  if (start_tick < h || start_tick >= tr.size()) {
    throw Error(ErrorCode::kBufferUnderflow,
                "prefill needs " + std::to_string(h) + " ticks of history");
  }
  return tr.states.middleCols(start_tick - h, h + 1);
}

AblationRow RunAblationConfig(const AblationConfig& config, const Dataset& dataset,
                              const RobotDescription& robot, const AblationOptions& options) {
  VaeConfig cfg = options.base;
  cfg.latent = config.latent;
  cfg.encoder_hidden = cfg.decoder_hidden = cfg.predictor_hidden = {config.width, config.width};
  cfg.window = config.window;
  cfg.encoder_frequency = config.encoder_frequency;
  AblationRow row;
  row.config = config;

  const int n_traj = static_cast<int>(dataset.trajectories.size());
  std::vector<int> holdout;
  for (int t = std::max(0, n_traj - 2); t < n_traj; ++t) holdout.push_back(t);

  VaeModel model;
  if (!options.lookup || !options.lookup(cfg, &model)) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainOptions topt;
    topt.execution = options.execution;
    model = Train(dataset, cfg, topt).model;
    row.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (options.store) options.store(cfg, model);
  }
  const EvalMetrics m = Evaluate(model, dataset, holdout);
  row.contact_accuracy = m.contact_accuracy;
  row.reconstruction_mse = m.reconstruction_mse;
  try {
    const DriveIdentification id = IdentifyDriveDimension(model, dataset, holdout);
    row.drive_dim = id.drive_dim;
    const int ticks = static_cast<int>(options.run_seconds * cfg.control_frequency);
    const RunLog log =
        RunClosedLoop(model, robot, NominalScript(id, options.swing_duration, ticks));
    const GaitEvaluation e = EvaluateGait(log, 10);
    row.cycles = e.cycles;
    row.swing_median = e.swing.median;
    row.passed = e.sustained;
    if (!e.sustained) row.failure = e.diverged ? "DivergedState" : e.note;
  } catch (const Error& err) {
    row.passed = false;
    row.failure = ErrorCodeName(err.code());
  }
  if (options.on_row) options.on_row(row);
  return row;
}

std::vector<AblationRow> AblationRun(const std::vector<AblationConfig>& grid,
                                     const Dataset& dataset, const RobotDescription& robot,
                                     const AblationOptions& options) {
  std::vector<AblationRow> rows;
  for (const auto& c : grid) rows.push_back(RunAblationConfig(c, dataset, robot, options));
  return rows;
}

std::string AblationReport(const std::vector<AblationRow>& rows) {
  std::ostringstream s;
  s << "| hidden width | latent | N | f_enc (Hz) | history (s) | result | contact acc | "
       "recon MSE | cycles | swing median (s) | note |\n";
  s << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  auto fmt = [](double v, int prec) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(prec);
    o << v;
    return o.str();
  };
  for (const auto& r : rows) {
    const auto& c = r.config;
    s << "| " << c.width << " | " << c.latent << " | " << c.window << " | "
      << fmt(c.encoder_frequency, 0) << " | " << fmt((c.window - 1) / c.encoder_frequency, 2)
      << " | " << (r.passed ? "pass" : "fail") << " | " << fmt(r.contact_accuracy, 3) << " | "
      << fmt(r.reconstruction_mse, 4) << " | " << r.cycles << " | " << fmt(r.swing_median, 3)
      << " | "
      << (c.label.empty() ? r.failure : c.label + (r.failure.empty() ? "" : ", " + r.failure))
      << " |\n";
  }
  s << "\nReference rows (robot-scale profile, 400 Hz control):\n\n";
  s << "| hidden width | latent | history (s) | result |\n|---|---|---|---|\n";
  s << "| 128 | 6 | 0.4 | pass |\n";
  s << "| 96 | 6 | 0.4 | fail |\n";
  s << "| 128 | 6 | 0.3 | fail (swing >= history) |\n";
  return s.str();
}

}  // namespace latent_gait
