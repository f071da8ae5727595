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

#include "latent_gait/protocol.h"

#include <iterator>
#include <type_traits>

#include "json.hpp"
#include "latent_gait/error.h"

namespace latent_gait {
namespace {

using nlohmann::json;

constexpr std::array<EventTag, 4> kEventTags = {EventTag::kDisturbanceDetected,
                                                EventTag::kCadenceRamp, EventTag::kRecovered,
                                                EventTag::kDiverged};

[[noreturn]] void Malformed(const std::string& what) {
  throw Error(ErrorCode::kMalformedFrame, what);
}

const json& Field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) Malformed(std::string("missing field '") + key + "'");
  return *it;
}

double Number(const json& j, const char* key) {
  const json& v = Field(j, key);
  if (!v.is_number()) Malformed(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::int64_t Integer(const json& j, const char* key) {
  const json& v = Field(j, key);
  if (!v.is_number_integer()) Malformed(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

bool Bool(const json& j, const char* key) {
  const json& v = Field(j, key);
  if (!v.is_boolean()) Malformed(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string String(const json& j, const char* key) {
  const json& v = Field(j, key);
  if (!v.is_string()) Malformed(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

template <typename T, std::size_t N>
std::array<T, N> Array(const json& j, const char* key) {
  const json& v = Field(j, key);
  if (!v.is_array() || v.size() != N) {
    Malformed(std::string("field '") + key + "' must be an array of " + std::to_string(N));
  }
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v[i].is_boolean()) Malformed(std::string("field '") + key + "' holds a non-boolean");
    } else {
      if (!v[i].is_number()) Malformed(std::string("field '") + key + "' holds a non-number");
    }
    out[i] = v[i].get<T>();
  }
  return out;
}

struct Encoder {
  json& j;
  void operator()(const SetDriveMsg& m) {
    j["amplitude"] = m.amplitude;
    j["swing_duration_s"] = m.swing_duration_s;
    j["stance_ticks"] = m.stance_ticks;
  }
  void operator()(const SetActionMsg& m) {
    j["x"] = m.x;
    j["y"] = m.y;
    j["yaw"] = m.yaw;
  }
  void operator()(const PushMsg& m) {
    j["twist_offset"] = m.twist_offset;
    j["duration_s"] = m.duration_s;
  }
  void operator()(const StartMsg&) {}
  void operator()(const PauseMsg&) {}
  void operator()(const ResetMsg&) {}
  void operator()(const TelemetryMsg& m) {
    j["tick"] = m.tick;
    j["contacts"] = m.contacts;
    j["drive"] = {{"amplitude", m.drive.amplitude},
                  {"swing_duration_s", m.drive.swing_duration_s},
                  {"stance_ticks", m.drive.stance_ticks},
                  {"phase", m.drive.phase}};
    j["elbo"] = m.elbo;
    j["theta"] = m.theta;
    j["z_slice"] = {{"drive", m.z_drive}, {"trot", m.z_trot}};
    j["base_twist"] = m.base_twist;
    j["last_swing_s"] = m.last_swing_s;
    j["last_stance_s"] = m.last_stance_s;
    j["status"] = m.status;
    j["controller"] = m.controller;
  }
  void operator()(const EventMsg& m) {
    j["kind"] = EventTagName(m.kind);
    j["tick"] = m.tick;
    j["detail"] = m.detail;
  }
  void operator()(const ErrorMsg& m) {
    j["code"] = m.code;
    j["message"] = m.message;
  }
};

Payload DecodePayload(const std::string& type, const json& j) {
  if (type == "set_drive") {
    return SetDriveMsg{Number(j, "amplitude"), Number(j, "swing_duration_s"),
                       static_cast<int>(Integer(j, "stance_ticks"))};
  }
  if (type == "set_action") return SetActionMsg{Number(j, "x"), Number(j, "y"), Number(j, "yaw")};
  if (type == "push") return PushMsg{Array<double, 6>(j, "twist_offset"), Number(j, "duration_s")};
  if (type == "start") return StartMsg{};
  if (type == "pause") return PauseMsg{};
  if (type == "reset") return ResetMsg{};
  if (type == "telemetry") {
    TelemetryMsg m;
    m.tick = Integer(j, "tick");
    m.contacts = Array<bool, 4>(j, "contacts");
    const json& d = Field(j, "drive");
    if (!d.is_object()) Malformed("field 'drive' must be an object");
    m.drive = {Number(d, "amplitude"), Number(d, "swing_duration_s"),
               static_cast<int>(Integer(d, "stance_ticks")), Number(d, "phase")};
    m.elbo = Number(j, "elbo");
    m.theta = Number(j, "theta");
    const json& z = Field(j, "z_slice");
    if (!z.is_object()) Malformed("field 'z_slice' must be an object");
    m.z_drive = Number(z, "drive");
    m.z_trot = Number(z, "trot");
    m.base_twist = Array<double, 6>(j, "base_twist");
    m.last_swing_s = Number(j, "last_swing_s");
    m.last_stance_s = Number(j, "last_stance_s");
    m.status = String(j, "status");
    m.controller = Bool(j, "controller");
    return m;
  }
  if (type == "event") {
    EventMsg m;
    const std::string kind = String(j, "kind");
    bool known = false;
    for (EventTag t : kEventTags) {
      if (kind == EventTagName(t)) {
        m.kind = t;
        known = true;
      }
    }
    if (!known) Malformed("unknown event kind '" + kind + "'");
    m.tick = Integer(j, "tick");
    m.detail = String(j, "detail");
    return m;
  }
  if (type == "error") return ErrorMsg{String(j, "code"), String(j, "message")};
  Malformed("unknown message type '" + type + "'");
}

}  // namespace

const char* PayloadTag(const Payload& payload) {
  static constexpr const char* kTags[] = {"set_drive", "set_action", "push",  "start", "pause",
                                          "reset",     "telemetry",  "event", "error"};
  static_assert(std::size(kTags) == std::variant_size_v<Payload>);
  return kTags[payload.index()];
}

const char* EventTagName(EventTag tag) {
  switch (tag) {
    case EventTag::kDisturbanceDetected:
      return "disturbance_detected";
    case EventTag::kCadenceRamp:
      return "cadence_ramp";
    case EventTag::kRecovered:
      return "recovered";
    case EventTag::kDiverged:
      return "diverged";
  }
  return "unknown";
}

std::string EncodeMessage(const Message& message) {
  json j = {{"version", message.version},
            {"session", message.session},
            {"type", PayloadTag(message.payload)}};
  std::visit(Encoder{j}, message.payload);
  return j.dump();
}

Message DecodeMessage(const std::string& frame) {
  json j;
  try {
    j = json::parse(frame);
  } catch (const json::parse_error& e) {
    Malformed(e.what());
  }
  if (!j.is_object()) Malformed("frame is not a JSON object");
  const std::int64_t version = Integer(j, "version");
  if (version < kMinProtocolVersion || version > kProtocolVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "protocol version " + std::to_string(version) + " unsupported; supported " +
                    std::to_string(kMinProtocolVersion) + ".." + std::to_string(kProtocolVersion));
  }
  Message m;
  m.version = static_cast<int>(version);
  m.session = String(j, "session");
  m.payload = DecodePayload(String(j, "type"), j);
  return m;
}

}  // namespace latent_gait
