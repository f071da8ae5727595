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

#include "latent_gait/service.h"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <cmath>
#include <deque>
#include <memory>
#include <thread>

#include "latent_gait/error.h"

namespace latent_gait {

const char* SessionStatusName(Session::Status status) {
  switch (status) {
    case Session::Status::kIdle:
      return "idle";
    case Session::Status::kRunning:
      return "running";
    case Session::Status::kPaused:
      return "paused";
  }
  return "unknown";
}

Session::Session(const VaeModel& model, const RobotDescription& robot, RunScript script,
                 SessionOptions options)
    : options_(std::move(options)),
      loop_(model, robot, script, options_.playback),
      timer_(model.config.control_frequency),
      control_frequency_(model.config.control_frequency),
      decimation_(std::max(
          1, static_cast<int>(std::ceil(control_frequency_ / options_.telemetry_hz - 1e-9)))) {
  if (!(options_.telemetry_hz > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "telemetry rate must be positive");
  }
}

Message Session::Wrap(Payload payload) const {
  return Message{kProtocolVersion, options_.id, std::move(payload)};
}

int Session::Connect(std::vector<Message>* welcome) {
  std::lock_guard<std::mutex> lock(mu_);
  const int id = next_client_++;
  clients_[id] = true;
  if (controller_ == 0) controller_ = id;
  if (welcome != nullptr) welcome->push_back(Wrap(Snapshot(id)));
  return id;
}

void Session::Disconnect(int client) {
  std::lock_guard<std::mutex> lock(mu_);
  clients_.erase(client);
  if (controller_ == client) controller_ = clients_.empty() ? 0 : clients_.begin()->first;
}

std::vector<Message> Session::Handle(int client, const std::string& frame) {
  auto reject = [&](const std::string& code, const std::string& what) {
    return std::vector<Message>{Wrap(ErrorMsg{code, what})};
  };
  Message m;
  try {
    m = DecodeMessage(frame);
  } catch (const Error& e) {
    return reject(ErrorCodeName(e.code()), e.what());
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (m.session != options_.id) {
    return reject("SessionMismatch", "this is session '" + options_.id + "'");
  }
  if (m.payload.index() >= std::variant_size_v<Payload> - 3) {
    return reject(ErrorCodeName(ErrorCode::kMalformedFrame),
                  std::string("'") + PayloadTag(m.payload) + "' is a server message");
  }
  if (client != controller_) return reject("ReadOnly", "another client holds control");
  if (const auto* d = std::get_if<SetDriveMsg>(&m.payload)) {
    if (!std::isfinite(d->amplitude) || !(d->swing_duration_s > 0.0) || d->stance_ticks < 0) {
      return reject(ErrorCodeName(ErrorCode::kCommandOutOfBounds),
                    "need finite amplitude, swing > 0 and stance_ticks >= 0");
    }
  }
  if (const auto* p = std::get_if<PushMsg>(&m.payload)) {
    if (!(p->duration_s > 0.0)) {
      return reject(ErrorCodeName(ErrorCode::kCommandOutOfBounds), "push duration must be > 0");
    }
  }
  pending_.push_back(m.payload);
  return {};
}

void Session::ApplyLocked(const Payload& payload, std::vector<Message>* out) {
  if (const auto* d = std::get_if<SetDriveMsg>(&payload)) {
    DriveCommand c;
    c.amplitude = d->amplitude;
    c.swing_duration = d->swing_duration_s;
    c.stance_ticks = d->stance_ticks;
    loop_.Apply(c);
  } else if (const auto* a = std::get_if<SetActionMsg>(&payload)) {
    DriveCommand c;
    c.action = Eigen::Vector3d(a->x, a->y, a->yaw);
    loop_.Apply(c);
  } else if (const auto* p = std::get_if<PushMsg>(&payload)) {
    Disturbance dist;
    dist.start_tick = loop_.tick();
    dist.duration_ticks =
        std::max(1, static_cast<int>(std::lround(p->duration_s * control_frequency_)));
    for (int i = 0; i < 6; ++i) dist.twist_offset(i) = p->twist_offset[i];
    loop_.AddDisturbance(dist);
  } else if (std::holds_alternative<StartMsg>(payload)) {
    if (loop_.diverged()) {
      out->push_back(
          Wrap(ErrorMsg{ErrorCodeName(ErrorCode::kDivergedState), "loop diverged; send reset"}));
    } else {
      status_ = Status::kRunning;
    }
  } else if (std::holds_alternative<PauseMsg>(payload)) {
    if (status_ == Status::kRunning) status_ = Status::kPaused;
  } else if (std::holds_alternative<ResetMsg>(payload)) {
    loop_.Reset();
    timer_ = PhaseTimer(control_frequency_);
    events_sent_ = 0;
    have_last_ = false;
    status_ = Status::kIdle;
  }
}

TelemetryMsg Session::Snapshot(int client) const {
  TelemetryMsg t;
  t.tick = loop_.tick();
  const DriveState& d = loop_.drive();
  t.drive = {d.amplitude, d.swing_duration, d.stance_ticks, d.phase};
  t.theta = loop_.theta();
  if (have_last_) {
    for (int i = 0; i < kNumLegs; ++i) t.contacts[i] = last_.contacts[i];
    t.elbo = last_.elbo;
    if (d.drive_dim >= 0 && d.drive_dim < last_.z.size()) t.z_drive = last_.z(d.drive_dim);
    if (options_.trot_dim >= 0 && options_.trot_dim < last_.z.size()) {
      t.z_trot = last_.z(options_.trot_dim);
    }
    for (int i = 0; i < 6; ++i) t.base_twist[i] = last_.state(kTwistOffset + i);
  }
  t.last_swing_s = timer_.last_swing();
  t.last_stance_s = timer_.last_stance();
  t.status = SessionStatusName(status_);
  t.controller = client != 0 && client == controller_;
  return t;
}

std::vector<Message> Session::Tick() {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Message> out;
  std::vector<Payload> pending;
  pending.swap(pending_);
  for (const auto& p : pending) ApplyLocked(p, &out);
  if (status_ == Status::kRunning) {
    last_ = loop_.Step();
    have_last_ = true;
    timer_.Update(last_.contacts);
    const auto& events = loop_.events();
    for (; events_sent_ < events.size(); ++events_sent_) {
      const PlannerEvent& e = events[events_sent_];
      out.push_back(Wrap(EventMsg{static_cast<EventTag>(e.kind), e.tick, e.detail}));
    }
    if (loop_.diverged()) status_ = Status::kPaused;
  }
  if (loop_.tick() % decimation_ == 0 || status_ != Status::kRunning) {
    // While idle or paused the tick does not advance; the server thins
    // these out by wall time.
    out.push_back(Wrap(Snapshot(0)));
  }
  return out;
}

Session::Status Session::status() const {
  std::lock_guard<std::mutex> lock(mu_);
  return status_;
}

std::int64_t Session::tick() const {
  std::lock_guard<std::mutex> lock(mu_);
  return loop_.tick();
}

int Session::controller() const {
  std::lock_guard<std::mutex> lock(mu_);
  return controller_;
}

int Session::client_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<int>(clients_.size());
}

// ---------------------------------------------------------------------------

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace ws = boost::beast::websocket;
using tcp = net::ip::tcp;

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Session& session) : ws_(std::move(socket)), session_(session) {}

  void Start() {
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      std::vector<Message> welcome;
      self->client_ = self->session_.Connect(&welcome);
      for (const auto& m : welcome) self->Send(EncodeMessage(m));
      self->Read();
    });
  }

  void Send(std::string frame) {
    if (closed_) return;
    // Drop telemetry for clients that cannot keep up.
    if (queue_.size() > 64) return;
    queue_.push_back(std::move(frame));
    if (queue_.size() == 1) Write();
  }

  int client() const { return client_; }
  bool closed() const { return closed_; }

  void Close() {
    if (closed_) return;
    closed_ = true;
    beast::error_code ec;
    ws_.next_layer().socket().close(ec);
  }

 private:
  void Read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->Finish();
        return;
      }
      const std::string frame = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      for (const auto& m : self->session_.Handle(self->client_, frame)) {
        self->Send(EncodeMessage(m));
      }
      self->Read();
    });
  }

  void Write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->Finish();
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->Write();
                    });
  }

  void Finish() {
    if (client_ != 0) session_.Disconnect(client_);
    client_ = 0;
    closed_ = true;
    queue_.clear();
  }

  ws::stream<beast::tcp_stream> ws_;
  Session& session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  int client_ = 0;
  bool closed_ = false;
};

}  // namespace

void Serve(Session& session, const ServeOptions& options, const std::atomic<bool>& stop,
           const std::function<void(unsigned short)>& on_listening) {
  net::io_context ioc(1);
  tcp::acceptor acceptor(ioc);
  beast::error_code ec;
  const tcp::endpoint endpoint(net::ip::make_address(options.address, ec), options.port);
  if (ec) throw Error(ErrorCode::kInvalidParams, "bad address " + options.address);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error(ErrorCode::kPortInUse,
                options.address + ":" + std::to_string(options.port) + ": " + ec.message());
  }
  const unsigned short port = acceptor.local_endpoint().port();

  std::vector<std::shared_ptr<Connection>> connections;
  std::function<void()> accept = [&] {
    acceptor.async_accept([&](beast::error_code aec, tcp::socket socket) {
      if (aec) return;
      auto c = std::make_shared<Connection>(std::move(socket), session);
      connections.push_back(c);
      c->Start();
      accept();
    });
  };
  accept();

  auto broadcast = [&](std::vector<Message> frames) {
    std::erase_if(connections, [](const auto& c) { return c->closed(); });
    for (auto& m : frames) {
      for (auto& c : connections) {
        if (c->client() == 0) continue;
        if (auto* t = std::get_if<TelemetryMsg>(&m.payload)) {
          t->controller = c->client() == session.controller();
        }
        c->Send(EncodeMessage(m));
      }
    }
  };

  std::thread ticker([&] {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(1.0 / session.control_frequency()));
    const auto idle_period =
        std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(
            session.telemetry_decimation() / session.control_frequency()));
    auto next = clock::now();
    auto last_idle = clock::time_point{};
    while (!stop.load()) {
      std::vector<Message> frames = session.Tick();
      if (session.status() != Session::Status::kRunning) {
        const auto now = clock::now();
        if (now - last_idle < idle_period) {
          std::erase_if(frames, [](const Message& m) {
            return std::holds_alternative<TelemetryMsg>(m.payload);
          });
        } else {
          last_idle = now;
        }
      }
      if (!frames.empty()) net::post(ioc, [&, f = std::move(frames)]() mutable { broadcast(f); });
      next += period;
      const auto now = clock::now();
      // After a stall, resume from now rather than bursting.
      if (next < now - period) next = now;
      std::this_thread::sleep_until(next);
    }
    net::post(ioc, [&] {
      beast::error_code ignored;
      acceptor.close(ignored);
      for (auto& c : connections) c->Close();
      ioc.stop();
    });
  });

  if (on_listening) on_listening(port);
  ioc.run();
  ticker.join();
}

}  // namespace latent_gait
