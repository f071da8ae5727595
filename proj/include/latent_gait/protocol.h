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

#ifndef LATENT_GAIT_PROTOCOL_H_
#define LATENT_GAIT_PROTOCOL_H_

#include <array>
#include <cstdint>
#include <string>
#include <variant>

namespace latent_gait {

// Frames are single JSON objects:
//   {"version": 1, "session": "<id>", "type": "<tag>", ...payload fields}
inline constexpr int kProtocolVersion = 1;
inline constexpr int kMinProtocolVersion = 1;

// client -> server
struct SetDriveMsg {
  double amplitude = 0.0;
  double swing_duration_s = 0.4;
  int stance_ticks = 0;
  bool operator==(const SetDriveMsg&) const = default;
};
struct SetActionMsg {
  double x = 0.0, y = 0.0, yaw = 0.0;
  bool operator==(const SetActionMsg&) const = default;
};
struct PushMsg {
  std::array<double, 6> twist_offset{};
  double duration_s = 0.1;
  bool operator==(const PushMsg&) const = default;
};
struct StartMsg {
  bool operator==(const StartMsg&) const = default;
};
struct PauseMsg {
  bool operator==(const PauseMsg&) const = default;
};
struct ResetMsg {
  bool operator==(const ResetMsg&) const = default;
};

// server -> client
struct DriveEcho {
  double amplitude = 0.0;
  double swing_duration_s = 0.0;
  int stance_ticks = 0;
  double phase = 0.0;
  bool operator==(const DriveEcho&) const = default;
};
struct TelemetryMsg {
  std::int64_t tick = 0;
  std::array<bool, 4> contacts{};
  DriveEcho drive;
  double elbo = 0.0;
  double theta = 0.0;
  double z_drive = 0.0;
  double z_trot = 0.0;
  std::array<double, 6> base_twist{};
  double last_swing_s = 0.0;
  double last_stance_s = 0.0;
  std::string status;  // idle | running | paused
  bool controller = false;
  bool operator==(const TelemetryMsg&) const = default;
};
enum class EventTag { kDisturbanceDetected, kCadenceRamp, kRecovered, kDiverged };
struct EventMsg {
  EventTag kind = EventTag::kDisturbanceDetected;
  std::int64_t tick = 0;
  std::string detail;
  bool operator==(const EventMsg&) const = default;
};
// Rejections of client frames (read-only client, malformed frame).
struct ErrorMsg {
  std::string code;
  std::string message;
  bool operator==(const ErrorMsg&) const = default;
};

using Payload = std::variant<SetDriveMsg, SetActionMsg, PushMsg, StartMsg, PauseMsg, ResetMsg,
                             TelemetryMsg, EventMsg, ErrorMsg>;

struct Message {
  int version = kProtocolVersion;
  std::string session;
  Payload payload;
  bool operator==(const Message&) const = default;
};

const char* PayloadTag(const Payload& payload);
const char* EventTagName(EventTag tag);

std::string EncodeMessage(const Message& message);
// Throws Error(kMalformedFrame) for bad JSON, unknown tags, missing or
// mistyped fields; Error(kVersionMismatch) for versions outside
// [kMinProtocolVersion, kProtocolVersion].
Message DecodeMessage(const std::string& frame);

}  // namespace latent_gait

#endif  // LATENT_GAIT_PROTOCOL_H_
