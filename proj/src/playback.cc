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

#include "latent_gait/playback.h"

#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "latent_gait/error.h"

namespace latent_gait {
namespace {

nlohmann::json VecJson(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd JsonVec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json DriveJson(const DriveState& d) {
  return {{"amplitude", d.amplitude},           {"swing_duration", d.swing_duration},
          {"stance_ticks", d.stance_ticks},     {"phase", d.phase},
          {"stance_counter", d.stance_counter}, {"drive_dim", d.drive_dim}};
}

DriveState DriveFromJson(const nlohmann::json& j) {
  DriveState d;
  d.amplitude = j.value("amplitude", d.amplitude);
  d.swing_duration = j.value("swing_duration", d.swing_duration);
  d.stance_ticks = j.value("stance_ticks", d.stance_ticks);
  d.phase = j.value("phase", d.phase);
  d.stance_counter = j.value("stance_counter", d.stance_counter);
  d.drive_dim = j.value("drive_dim", d.drive_dim);
  return d;
}

}  // namespace

StateBuffer::StateBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw Error(ErrorCode::kInvalidParams, "buffer capacity must be >= 1");
}

void StateBuffer::Push(const Eigen::VectorXd& state) {
  states_.push_back(state);
  if (static_cast<int>(states_.size()) > capacity_) states_.pop_front();
}

const Eigen::VectorXd& StateBuffer::Back(int lag) const {
  if (lag < 0 || lag >= size()) {
    throw Error(ErrorCode::kBufferUnderflow,
                "buffer holds " + std::to_string(size()) + " states, lag " + std::to_string(lag));
  }
  return states_[states_.size() - 1 - lag];
}

Eigen::VectorXd SampleWindow(const StateBuffer& buffer, const VaeConfig& config,
                             const NormalizationStats& stats) {
  const int r = config.Ratio();
  const int d = config.state_dim;
  if (buffer.size() < config.HistoryTicks() + 1) {
    throw Error(ErrorCode::kBufferUnderflow, "window needs " +
                                                 std::to_string(config.HistoryTicks() + 1) +
                                                 " states, have " + std::to_string(buffer.size()));
  }
  Eigen::VectorXd w(config.InputSize());
  for (int i = 0; i < config.window; ++i) {
    w.segment(i * d, d) = stats.Standardize(buffer.Back(r * (config.window - 1 - i)));
  }
  return w;
}

RobotState InjectDisturbance(const RobotState& state, const Disturbance& disturbance,
                             const ContactState& contacts, const RobotDescription& robot,
                             std::mt19937_64& rng) {
  RobotState out = state;
  out.base_twist += disturbance.twist_offset;
  if (disturbance.noise_scale > 0.0) {
    std::normal_distribution<double> noise(0.0, disturbance.noise_scale);
    for (int i = 0; i < kNumJoints; ++i) out.q(i) += noise(rng);
    for (auto& foot : out.ee) {
      for (int i = 0; i < 3; ++i) foot(i) += noise(rng);
    }
    for (int i = 0; i < kNumLegs; ++i) {
      if (!contacts[i]) out.lambda[i].setZero();
    }
    out.tau = JointTorquesFromForces(robot, out.q, out.lambda, contacts);
  }
  return out;
}

ContactState EstimateContacts(const Eigen::Ref<const Eigen::VectorXd>& probabilities,
                              double threshold) {
  if (probabilities.size() < kNumLegs) {
    throw Error(ErrorCode::kShapeMismatch, "need four contact probabilities");
  }
  ContactState c;
  for (int i = 0; i < kNumLegs; ++i) c[i] = probabilities(i) > threshold;
  return c;
}

nlohmann::json RunScript::ToJson() const {
  nlohmann::json cmds = nlohmann::json::array();
  for (const auto& c : commands) {
    nlohmann::json j = {{"tick", c.tick}};
    if (c.amplitude) j["amplitude"] = *c.amplitude;
    if (c.swing_duration) j["swing_duration"] = *c.swing_duration;
    if (c.stance_ticks) j["stance_ticks"] = *c.stance_ticks;
    if (c.action) j["action"] = VecJson(*c.action);
    cmds.push_back(j);
  }
  nlohmann::json dist = nlohmann::json::array();
  for (const auto& d : disturbances) {
    dist.push_back({{"start_tick", d.start_tick},
                    {"duration_ticks", d.duration_ticks},
                    {"twist_offset", VecJson(d.twist_offset)},
                    {"noise_scale", d.noise_scale}});
  }
  return {{"drive", DriveJson(drive)},
          {"action", VecJson(action)},
          {"commands", cmds},
          {"disturbances", dist},
          {"duration_ticks", duration_ticks},
          {"seed", seed},
          {"theta", theta},
          {"cadence",
           {{"enabled", cadence.enabled},
            {"nominal_swing", cadence.nominal_swing},
            {"min_swing", cadence.min_swing},
            {"ramp_seconds", cadence.ramp_seconds},
            {"hold_seconds", cadence.hold_seconds}}}};
}

RunScript RunScript::FromJson(const nlohmann::json& j) {
  RunScript s;
  if (j.contains("drive")) s.drive = DriveFromJson(j["drive"]);
  if (j.contains("action")) s.action = JsonVec(j["action"]);
  for (const auto& c : j.value("commands", nlohmann::json::array())) {
    DriveCommand cmd;
    cmd.tick = c.at("tick").get<int>();
    if (c.contains("amplitude")) cmd.amplitude = c["amplitude"].get<double>();
    if (c.contains("swing_duration")) cmd.swing_duration = c["swing_duration"].get<double>();
    if (c.contains("stance_ticks")) cmd.stance_ticks = c["stance_ticks"].get<int>();
    if (c.contains("action")) cmd.action = Eigen::Vector3d(JsonVec(c["action"]));
    s.commands.push_back(cmd);
  }
  for (const auto& d : j.value("disturbances", nlohmann::json::array())) {
    Disturbance dist;
    dist.start_tick = d.at("start_tick").get<int>();
    dist.duration_ticks = d.value("duration_ticks", 1);
    if (dist.duration_ticks < 1) {
      throw Error(ErrorCode::kInvalidParams, "disturbance duration must be >= 1 tick");
    }
    if (d.contains("twist_offset")) dist.twist_offset = JsonVec(d["twist_offset"]);
    dist.noise_scale = d.value("noise_scale", 0.0);
    s.disturbances.push_back(dist);
  }
  s.duration_ticks = j.value("duration_ticks", s.duration_ticks);
  s.seed = j.value("seed", s.seed);
  s.theta = j.value("theta", s.theta);
  if (j.contains("cadence")) {
    const auto& c = j["cadence"];
    s.cadence.enabled = c.value("enabled", false);
    s.cadence.nominal_swing = c.value("nominal_swing", s.drive.swing_duration);
    s.cadence.min_swing = c.value("min_swing", s.cadence.min_swing);
    s.cadence.ramp_seconds = c.value("ramp_seconds", s.cadence.ramp_seconds);
    s.cadence.hold_seconds = c.value("hold_seconds", s.cadence.hold_seconds);
  }
  return s;
}

std::vector<ContactState> RunLog::ContactLog() const {
  std::vector<ContactState> out;
  out.reserve(ticks.size());
  for (const auto& t : ticks) out.push_back(t.contacts);
  return out;
}

RobotState StandingState(const RobotDescription& robot) {
  RobotState s;
  const ContactState all = {true, true, true, true};
  for (Leg leg : kAllLegs) {
    const int i = static_cast<int>(leg);
    s.q.segment<3>(3 * i) = LegInverseKinematics(robot, leg, robot.NominalFoot(leg));
    s.ee[i] = LegForwardKinematics(robot, leg, s.q.segment<3>(3 * i));
  }
  s.lambda = StanceForceDistribution(all, s.ee, Vec3::Zero(), Vec3::Zero(), robot);
  s.tau = JointTorquesFromForces(robot, s.q, s.lambda, all);
  return s;
}

std::string DivergenceReason(const Eigen::VectorXd& state, double joint_limit, double speed_limit) {
  if (!state.allFinite()) return "non-finite state";
  const double q = state.segment(kJointOffset, kNumJoints).cwiseAbs().maxCoeff();
  if (q >= joint_limit) return "joint angle " + std::to_string(q);
  const double v = state.segment(kTwistOffset, 3).norm();
  if (v >= speed_limit) return "base speed " + std::to_string(v);
  return "";
}

ClosedLoop::ClosedLoop(const VaeModel& model, const RobotDescription& robot,
                       const RunScript& script, const PlaybackOptions& options)
    : model_(&model),
      robot_(robot),
      options_(options),
      script_(script),
      buffer_(model.config.HistoryTicks() + 1),
      planner_(&model, options.planner),
      rng_(script.seed) {
  if (options_.prefill.cols() > 0 && options_.prefill.rows() != model.config.state_dim) {
    throw Error(ErrorCode::kShapeMismatch, "prefill states have the wrong dimension");
  }
  Reset();
}

void ClosedLoop::Reset() {
  buffer_ = StateBuffer(model_->config.HistoryTicks() + 1);
  if (options_.prefill.cols() > 0) {
    for (Eigen::Index c = 0; c < options_.prefill.cols(); ++c)
      buffer_.Push(options_.prefill.col(c));
  } else {
    const Eigen::VectorXd standing = StandingState(robot_).Flatten();
    for (int i = 0; i < buffer_.capacity(); ++i) buffer_.Push(standing);
  }
  planner_.Reset();
  planner_.drive() = script_.drive;
  monitor_ = ElboMonitor(script_.theta);
  CadenceOptions cadence_options = script_.cadence;
  cadence_options.nominal_swing = script_.drive.swing_duration;
  cadence_ = CadenceResponse(cadence_options);
  action_ = script_.action;
  disturbances_ = script_.disturbances;
  rng_.seed(script_.seed);
  tick_ = 0;
  diverged_ = false;
  diverged_reason_.clear();
  events_.clear();
}

void ClosedLoop::Apply(const DriveCommand& c) {
  DriveState& drive = planner_.drive();
  if (c.amplitude) drive.amplitude = *c.amplitude;
  if (c.swing_duration) {
    drive.swing_duration = *c.swing_duration;
    cadence_.set_nominal_swing(*c.swing_duration);
  }
  if (c.stance_ticks) drive.stance_ticks = *c.stance_ticks;
  if (c.action) action_ = *c.action;
}

void ClosedLoop::AddDisturbance(const Disturbance& d) {
  if (d.duration_ticks < 1) {
    throw Error(ErrorCode::kInvalidParams, "disturbance duration must be >= 1 tick");
  }
  disturbances_.push_back(d);
}

void ClosedLoop::set_theta(double theta) {
  script_.theta = theta;
  monitor_.set_theta(theta);
}

TickRecord ClosedLoop::Step() {
  if (diverged_) throw Error(ErrorCode::kDivergedState, diverged_reason_);
  const VaeConfig& cfg = model_->config;
  const int d = cfg.state_dim;
  const double dt = 1.0 / cfg.control_frequency;
  const int next_block = std::min(1, cfg.future);
  const int contact_block = std::min(1, cfg.contact_steps - 1);

  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::VectorXd window = SampleWindow(buffer_, cfg, model_->stats);
  const PlanOutput out = planner_.Step(window, action_);
  if (script_.theta > 0.0) {
    const bool crossed = monitor_.Update(out.elbo, dt);
    cadence_.Update(monitor_, crossed, tick_, dt, &planner_.drive(), &events_);
  }
  const ContactState contacts =
      EstimateContacts(out.contacts.segment(kNumLegs * contact_block, kNumLegs));
  RobotState next =
      RobotState::FromFlat(model_->stats.Destandardize(out.decoded.segment(next_block * d, d)));
  bool disturbed = false;
  for (const auto& dist : disturbances_) {
    if (dist.ActiveAt(tick_)) {
      next = InjectDisturbance(next, dist, contacts, robot_, rng_);
      disturbed = true;
    }
  }
  ZeroSwingForces(robot_, contacts, &next);
  const Eigen::VectorXd x = next.Flatten();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  TickRecord rec;
  rec.tick = tick_;
  rec.state = x;
  rec.contact_prob = out.contacts.head(kNumLegs);
  rec.contacts = contacts;
  rec.z_raw = out.z_raw;
  rec.z = out.z;
  rec.drive = out.drive;
  rec.drive_value = out.drive_value;
  rec.action = action_;
  rec.elbo = out.elbo;
  rec.elbo_mse = out.elbo_mse;
  rec.elbo_kl = out.elbo_kl;
  rec.disturbed = disturbed;
  rec.tick_seconds = secs;

  const std::string reason = DivergenceReason(x, options_.joint_limit, options_.speed_limit);
  if (!reason.empty()) {
    diverged_ = true;
    diverged_reason_ = reason;
    events_.push_back({tick_, EventKind::kDiverged, reason});
  } else {
    buffer_.Push(x);
  }
  ++tick_;
  return rec;
}

void PhaseTimer::Update(const ContactState& c) {
  int pattern = 3;
  if (c[0] && c[1] && c[2] && c[3]) {
    pattern = 0;
  } else if (!c[0] && c[1] && c[2] && !c[3]) {
    pattern = 1;
  } else if (c[0] && !c[1] && !c[2] && c[3]) {
    pattern = 2;
  }
  if (pattern == pattern_) {
    ++run_;
    return;
  }
  // The run in progress at startup has no known beginning.
  if (seen_change_) {
    if (pattern_ == 0) last_stance_ = run_ * dt_;
    if (pattern_ == 1 || pattern_ == 2) last_swing_ = run_ * dt_;
  }
  seen_change_ = pattern_ != -1;
  pattern_ = pattern;
  run_ = 1;
}

RunLog RunClosedLoop(const VaeModel& model, const RobotDescription& robot, const RunScript& script,
                     const PlaybackOptions& options) {
  ClosedLoop loop(model, robot, script, options);
  RunLog log;
  log.model_hash = ModelHash(model);
  log.script = script;
  log.theta = script.theta;
  log.control_frequency = model.config.control_frequency;
  log.ticks.reserve(script.duration_ticks);

  std::vector<DriveCommand> commands = script.commands;
  std::stable_sort(commands.begin(), commands.end(),
                   [](const DriveCommand& a, const DriveCommand& b) { return a.tick < b.tick; });
  std::size_t next_cmd = 0;
  for (int tick = 0; tick < script.duration_ticks; ++tick) {
    for (; next_cmd < commands.size() && commands[next_cmd].tick <= tick; ++next_cmd) {
      loop.Apply(commands[next_cmd]);
    }
    log.ticks.push_back(loop.Step());
    if (loop.diverged()) {
      log.diverged = true;
      log.diverged_tick = tick;
      log.diverged_reason = loop.diverged_reason();
      break;
    }
  }
  log.events = loop.events();
  return log;
}

void WriteRunLogJsonl(const RunLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : log.events) {
    events.push_back({{"tick", e.tick}, {"kind", EventKindName(e.kind)}, {"detail", e.detail}});
  }
  out << nlohmann::json{{"type", "header"},
                        {"model_hash", log.model_hash},
                        {"script", log.script.ToJson()},
                        {"seed", log.script.seed},
                        {"theta", log.theta},
                        {"control_frequency", log.control_frequency},
                        {"diverged", log.diverged},
                        {"diverged_tick", log.diverged_tick},
                        {"diverged_reason", log.diverged_reason},
                        {"events", events}}
             .dump()
      << '\n';
  for (const auto& t : log.ticks) {
    out << nlohmann::json{{"k", t.tick},
                          {"x", VecJson(t.state)},
                          {"p", VecJson(t.contact_prob)},
                          {"s", t.contacts},
                          {"z_raw", VecJson(t.z_raw)},
                          {"z", VecJson(t.z)},
                          {"drive", DriveJson(t.drive)},
                          {"drive_value", t.drive_value},
                          {"a", VecJson(t.action)},
                          {"elbo", t.elbo},
                          {"elbo_mse", t.elbo_mse},
                          {"elbo_kl", t.elbo_kl},
                          {"disturbed", t.disturbed},
                          {"tick_seconds", t.tick_seconds}}
               .dump()
        << '\n';
  }
}

RunLog ReadRunLogJsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  RunLog log;
  std::string line;
  try {
    if (!std::getline(in, line)) throw Error(ErrorCode::kCorruptFile, "empty run log");
    const auto h = nlohmann::json::parse(line);
    if (h.value("type", "") != "header") throw Error(ErrorCode::kCorruptFile, "missing header");
    log.model_hash = h.value("model_hash", "");
    log.script = RunScript::FromJson(h.at("script"));
    log.theta = h.value("theta", 0.0);
    log.control_frequency = h.value("control_frequency", 100.0);
    log.diverged = h.value("diverged", false);
    log.diverged_tick = h.value("diverged_tick", -1);
    log.diverged_reason = h.value("diverged_reason", "");
    for (const auto& e : h.value("events", nlohmann::json::array())) {
      PlannerEvent ev;
      ev.tick = e.at("tick").get<int>();
      const std::string kind = e.at("kind").get<std::string>();
      for (EventKind k : {EventKind::kDisturbanceDetected, EventKind::kCadenceRamp,
                          EventKind::kRecovered, EventKind::kDiverged}) {
        if (kind == EventKindName(k)) ev.kind = k;
      }
      ev.detail = e.value("detail", "");
      log.events.push_back(ev);
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      TickRecord t;
      t.tick = j.at("k").get<int>();
      t.state = JsonVec(j.at("x"));
      t.contact_prob = JsonVec(j.at("p"));
      t.contacts = j.at("s").get<ContactState>();
      t.z_raw = JsonVec(j.at("z_raw"));
      t.z = JsonVec(j.at("z"));
      t.drive = DriveFromJson(j.at("drive"));
      t.drive_value = j.at("drive_value").get<double>();
      t.action = JsonVec(j.at("a"));
      t.elbo = j.at("elbo").get<double>();
      t.elbo_mse = j.value("elbo_mse", 0.0);
      t.elbo_kl = j.value("elbo_kl", 0.0);
      t.disturbed = j.value("disturbed", false);
      t.tick_seconds = j.value("tick_seconds", 0.0);
      log.ticks.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("run log: ") + e.what());
  }
  return log;
}

void WriteRunLogCsv(const RunLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "tick,elbo,c_LF,c_RF,c_LH,c_RH,swing_duration,vx,vy,vz,wx,wy,wz\n";
  for (const auto& t : log.ticks) {
    out << t.tick << ',' << t.elbo;
    for (bool c : t.contacts) out << ',' << (c ? 1 : 0);
    out << ',' << t.drive.swing_duration;
    for (int i = 0; i < 6; ++i) out << ',' << t.state(kTwistOffset + i);
    out << '\n';
  }
}

std::string ModelHash(const VaeModel& model) {
  const Eigen::VectorXd p = model.Parameters();
  const uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(p.data()),
                          static_cast<uInt>(p.size() * sizeof(double)));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace latent_gait
