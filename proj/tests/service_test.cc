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

#include <gtest/gtest.h>

#include <atomic>
#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <future>
#include <random>
#include <thread>

#include "latent_gait/error.h"

namespace latent_gait {
namespace {

VaeModel TinyModel() {
  VaeConfig c;
  c.window = 4;
  c.future = 2;
  c.contact_steps = 2;
  c.latent = 3;
  c.encoder_hidden = c.decoder_hidden = c.predictor_hidden = {8};
  RobotDescription robot;
  const Eigen::VectorXd s = StandingState(robot).Flatten();
  Eigen::MatrixXd data = s.replicate(1, 8);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.05);
  for (int i = 0; i < data.size(); ++i) data(i) += g(rng);
  return VaeModel::Create(c, NormalizationStats::Compute(data));
}

RunScript Initial() {
  RunScript s;
  s.drive.amplitude = 1.0;
  s.drive.drive_dim = 1;
  return s;
}

std::string Frame(Payload p, const std::string& session = "session") {
  return EncodeMessage(Message{kProtocolVersion, session, std::move(p)});
}

int CountTelemetry(const std::vector<Message>& v) {
  int n = 0;
  for (const auto& m : v) n += std::holds_alternative<TelemetryMsg>(m.payload);
  return n;
}

class SessionTest : public ::testing::Test {
 protected:
  VaeModel model_ = TinyModel();
  RobotDescription robot_;
};

TEST_F(SessionTest, FirstClientControlsOthersReadOnly) {
  Session s(model_, robot_, Initial());
  std::vector<Message> welcome;
  const int a = s.Connect(&welcome);
  const int b = s.Connect();
  ASSERT_EQ(welcome.size(), 1u);
  EXPECT_TRUE(std::get<TelemetryMsg>(welcome[0].payload).controller);
  EXPECT_EQ(s.controller(), a);
  EXPECT_TRUE(s.Handle(a, Frame(StartMsg{})).empty());
  const auto r = s.Handle(b, Frame(PauseMsg{}));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(std::get<ErrorMsg>(r[0].payload).code, "ReadOnly");
  s.Disconnect(a);
  EXPECT_EQ(s.controller(), b);
  EXPECT_EQ(s.client_count(), 1);
}

TEST_F(SessionTest, BadFramesGetErrorReplies) {
  Session s(model_, robot_, Initial());
  const int a = s.Connect();
  auto code = [&](const std::string& f) {
    const auto r = s.Handle(a, f);
    return r.size() == 1 ? std::get<ErrorMsg>(r[0].payload).code : std::string("none");
  };
  EXPECT_EQ(code("{\"version\":1"), "MalformedFrame");
  EXPECT_EQ(code(R"({"version":1,"session":"session","type":"warp"})"), "MalformedFrame");
  EXPECT_EQ(code(R"({"version":9,"session":"session","type":"start"})"), "VersionMismatch");
  EXPECT_EQ(code(Frame(StartMsg{}, "other")), "SessionMismatch");
  EXPECT_EQ(code(Frame(EventMsg{})), "MalformedFrame");
  EXPECT_EQ(code(Frame(SetDriveMsg{1.0, 0.0, 0})), "CommandOutOfBounds");
  EXPECT_EQ(code(Frame(SetDriveMsg{1.0, 0.3, -1})), "CommandOutOfBounds");
  EXPECT_EQ(code(Frame(SetDriveMsg{1.0, 0.3, 0})), "none");
}

TEST_F(SessionTest, CommandsApplyBetweenTicks) {
  Session s(model_, robot_, Initial());
  const int a = s.Connect();
  s.Handle(a, Frame(StartMsg{}));
  EXPECT_EQ(s.status(), Session::Status::kIdle);
  s.Tick();
  EXPECT_EQ(s.status(), Session::Status::kRunning);
  EXPECT_EQ(s.tick(), 1);
  s.Handle(a, Frame(PauseMsg{}));
  s.Tick();
  EXPECT_EQ(s.tick(), 1);
  s.Handle(a, Frame(StartMsg{}));
  for (int i = 0; i < 5; ++i) s.Tick();
  EXPECT_EQ(s.tick(), 6);
  s.Handle(a, Frame(ResetMsg{}));
  s.Tick();
  EXPECT_EQ(s.tick(), 0);
  EXPECT_EQ(s.status(), Session::Status::kIdle);
}

TEST_F(SessionTest, TelemetryIsDecimatedToThirtyHertz) {
  Session s(model_, robot_, Initial());
  const int a = s.Connect();
  EXPECT_EQ(s.telemetry_decimation(), 4);
  s.Handle(a, Frame(StartMsg{}));
  int frames = 0;
  for (int i = 0; i < 100; ++i) frames += CountTelemetry(s.Tick());
  EXPECT_LE(frames, 30);
  EXPECT_GE(frames, 24);
}

TEST_F(SessionTest, SetDriveEchoesWithinTwoFrames) {
  Session s(model_, robot_, Initial());
  const int a = s.Connect();
  s.Handle(a, Frame(StartMsg{}));
  for (int i = 0; i < 13; ++i) s.Tick();
  s.Handle(a, Frame(SetDriveMsg{0.7, 0.25, 2}));
  int frames = 0;
  bool echoed = false;
  while (frames < 2 && !echoed) {
    for (const auto& m : s.Tick()) {
      if (const auto* t = std::get_if<TelemetryMsg>(&m.payload)) {
        ++frames;
        echoed = t->drive.amplitude == 0.7 && t->drive.swing_duration_s == 0.25 &&
                 t->drive.stance_ticks == 2;
      }
    }
  }
  EXPECT_TRUE(echoed);
  EXPECT_EQ(frames, 1);
}

TEST_F(SessionTest, PushRaisesDetectionEvent) {
  RunScript init = Initial();
  init.theta = 1e-9;  // any ELBO crosses
  Session s(model_, robot_, init);
  const int a = s.Connect();
  s.Handle(a, Frame(StartMsg{}));
  s.Handle(a, Frame(PushMsg{{0.4, 0, 0, 0, 0, 0}, 0.1}));
  bool detected = false;
  for (int i = 0; i < 25 && !detected; ++i) {
    for (const auto& m : s.Tick()) {
      if (const auto* e = std::get_if<EventMsg>(&m.payload)) {
        detected |= e->kind == EventTag::kDisturbanceDetected;
      }
    }
  }
  EXPECT_TRUE(detected);
}

TEST_F(SessionTest, DivergencePausesAndNeedsReset) {
  SessionOptions opt;
  opt.playback.speed_limit = 1e-9;
  Session s(model_, robot_, Initial(), opt);
  const int a = s.Connect();
  s.Handle(a, Frame(StartMsg{}));
  bool diverged = false;
  for (const auto& m : s.Tick()) {
    if (const auto* e = std::get_if<EventMsg>(&m.payload))
      diverged |= e->kind == EventTag::kDiverged;
  }
  EXPECT_TRUE(diverged);
  EXPECT_EQ(s.status(), Session::Status::kPaused);
  s.Handle(a, Frame(StartMsg{}));
  const auto out = s.Tick();
  bool refused = false;
  for (const auto& m : out) refused |= std::holds_alternative<ErrorMsg>(m.payload);
  EXPECT_TRUE(refused);
  s.Handle(a, Frame(ResetMsg{}));
  s.Handle(a, Frame(StartMsg{}));
  s.Tick();
  EXPECT_EQ(s.tick(), 1);
}

// ---------------------------------------------------------------------------

namespace net = boost::asio;
namespace beast = boost::beast;
using tcp = net::ip::tcp;

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
  }
  Message Read() {
    beast::flat_buffer b;
    ws_.read(b);
    return DecodeMessage(beast::buffers_to_string(b.data()));
  }
  // Reads until `pred` holds or `limit` frames pass.
  template <typename Pred>
  bool ReadUntil(Pred pred, int limit) {
    for (int i = 0; i < limit; ++i) {
      if (pred(Read())) return true;
    }
    return false;
  }
  void Send(const std::string& f) { ws_.write(net::buffer(f)); }
  void Close() { ws_.close(beast::websocket::close_code::normal); }

 private:
  net::io_context ioc_;
  beast::websocket::stream<tcp::socket> ws_;
};

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    session_ = std::make_unique<Session>(model_, robot_, Initial());
    std::promise<unsigned short> bound;
    auto f = bound.get_future();
    ServeOptions opt;
    opt.port = 0;
    thread_ = std::thread([this, opt, &bound] {
      Serve(*session_, opt, stop_, [&](unsigned short p) { bound.set_value(p); });
    });
    port_ = f.get();
  }
  void TearDown() override {
    stop_ = true;
    thread_.join();
  }

  VaeModel model_ = TinyModel();
  RobotDescription robot_;
  std::unique_ptr<Session> session_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
  unsigned short port_ = 0;
};

bool IsTelemetry(const Message& m) { return std::holds_alternative<TelemetryMsg>(m.payload); }

TEST_F(ServerTest, StreamsTelemetryAndAcceptsCommands) {
  Client a(port_);
  const Message hello = a.Read();
  ASSERT_TRUE(IsTelemetry(hello));
  EXPECT_EQ(hello.session, "session");
  EXPECT_TRUE(std::get<TelemetryMsg>(hello.payload).controller);
  a.Send(Frame(StartMsg{}));
  a.Send(Frame(SetDriveMsg{0.5, 0.3, 1}));
  EXPECT_TRUE(a.ReadUntil(
      [](const Message& m) {
        const auto* t = std::get_if<TelemetryMsg>(&m.payload);
        return t != nullptr && t->status == "running" && t->drive.swing_duration_s == 0.3 &&
               t->tick > 0;
      },
      50));
}

TEST_F(ServerTest, SecondViewerIsReadOnlyAndSessionSurvivesDisconnect) {
  auto a = std::make_unique<Client>(port_);
  a->Read();
  a->Send(Frame(StartMsg{}));
  Client b(port_);
  EXPECT_FALSE(std::get<TelemetryMsg>(b.Read().payload).controller);
  b.Send(Frame(PauseMsg{}));
  EXPECT_TRUE(b.ReadUntil(
      [](const Message& m) {
        const auto* e = std::get_if<ErrorMsg>(&m.payload);
        return e != nullptr && e->code == "ReadOnly";
      },
      50));
  a->Close();
  a.reset();
  const std::int64_t before = session_->tick();
  EXPECT_TRUE(b.ReadUntil(
      [&](const Message& m) {
        const auto* t = std::get_if<TelemetryMsg>(&m.payload);
        return t != nullptr && t->controller && t->tick > before;
      },
      100));
  EXPECT_EQ(session_->status(), Session::Status::kRunning);
  // Reconnect resumes telemetry.
  Client c(port_);
  EXPECT_TRUE(IsTelemetry(c.Read()));
  EXPECT_TRUE(IsTelemetry(c.Read()));
}

TEST_F(ServerTest, PortInUse) {
  ServeOptions opt;
  opt.port = port_;
  std::atomic<bool> stop{true};
  try {
    Serve(*session_, opt, stop);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPortInUse);
  }
}

}  // namespace
}  // namespace latent_gait
