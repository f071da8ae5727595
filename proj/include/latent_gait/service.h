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

#ifndef LATENT_GAIT_SERVICE_H_
#define LATENT_GAIT_SERVICE_H_

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "latent_gait/playback.h"
#include "latent_gait/protocol.h"

namespace latent_gait {

struct SessionOptions {
  std::string id = "session";
  double telemetry_hz = 30.0;
  int trot_dim = -1;  // -1: not reported
  PlaybackOptions playback;
};

// One live planner loop shared by all connected clients. Frames from
// clients are queued by Handle() and applied at the start of the next
// Tick(); Tick() is expected to run on a single thread. All methods are
// thread-safe.
class Session {
 public:
  enum class Status { kIdle, kRunning, kPaused };

  // `script` gives the initial drive (with drive_dim), action, theta and
  // cadence options; its duration, commands and disturbances are ignored.
  Session(const VaeModel& model, const RobotDescription& robot, RunScript script,
          SessionOptions options = {});

  // The first connected client controls the session; others are
  // read-only until the controller leaves. Returns the frames owed to the
  // new client (an immediate telemetry snapshot).
  int Connect(std::vector<Message>* welcome = nullptr);
  void Disconnect(int client);

  // Replies for the sending client only (errors); empty when accepted.
  std::vector<Message> Handle(int client, const std::string& frame);

  // Applies queued commands and, when running, advances the loop one tick.
  // Returns frames for every client: decimated telemetry and events.
  std::vector<Message> Tick();

  Status status() const;
  std::int64_t tick() const;
  int controller() const;
  int client_count() const;
  int telemetry_decimation() const { return decimation_; }
  double control_frequency() const { return control_frequency_; }
  const std::string& id() const { return options_.id; }

 private:
  Message Wrap(Payload payload) const;
  TelemetryMsg Snapshot(int client) const;
  void ApplyLocked(const Payload& payload, std::vector<Message>* out);

  mutable std::mutex mu_;
  SessionOptions options_;
  ClosedLoop loop_;
  PhaseTimer timer_;
  double control_frequency_;
  int decimation_;
  Status status_ = Status::kIdle;
  std::vector<Payload> pending_;
  std::map<int, bool> clients_;  // id -> connected
  int next_client_ = 1;
  int controller_ = 0;
  std::size_t events_sent_ = 0;
  TickRecord last_;
  bool have_last_ = false;
};

const char* SessionStatusName(Session::Status status);

struct ServeOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
};

// Runs the websocket service until `stop` becomes true. The planner ticks
// on its own thread at the session's control frequency; network I/O runs on
// another. `on_listening` receives the bound port. Throws Error(kPortInUse)
// when the port cannot be bound.
void Serve(Session& session, const ServeOptions& options, const std::atomic<bool>& stop,
           const std::function<void(unsigned short)>& on_listening = {});

}  // namespace latent_gait

#endif  // LATENT_GAIT_SERVICE_H_
