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

#include <gtest/gtest.h>

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "latent_gait/error.h"

namespace latent_gait {
namespace {

std::vector<Message> AllVariants() {
  TelemetryMsg t;
  t.tick = 77;
  t.contacts = {true, false, false, true};
  t.drive = {1.5, 0.2, 3, 6.1};
  t.elbo = 3.25;
  t.theta = 9.0;
  t.z_drive = -0.125;
  t.z_trot = 0.5;
  t.base_twist = {0.1, -0.2, 0.0, 0.01, 0.02, 0.3};
  t.last_swing_s = 0.33;
  t.last_stance_s = 0.02;
  t.status = "paused";
  t.controller = true;
  PushMsg push;
  push.twist_offset = {0.4, 0.1, 0, 0, 0, -0.2};
  push.duration_s = 0.15;
  std::vector<Payload> payloads = {SetDriveMsg{0.7, 0.13, 2},
                                   SetActionMsg{0.3, -0.1, 0.05},
                                   push,
                                   StartMsg{},
                                   PauseMsg{},
                                   ResetMsg{},
                                   t,
                                   ErrorMsg{"ReadOnly", "no control"}};
  for (EventTag k : {EventTag::kDisturbanceDetected, EventTag::kCadenceRamp, EventTag::kRecovered,
                     EventTag::kDiverged}) {
    payloads.push_back(EventMsg{k, 12, "x"});
  }
  std::vector<Message> out;
  for (auto& p : payloads) out.push_back(Message{kProtocolVersion, "abc", p});
  return out;
}

TEST(Protocol, RoundTripEveryVariant) {
  const auto all = AllVariants();
  std::vector<bool> seen(std::variant_size_v<Payload>, false);
  for (const Message& m : all) {
    const Message back = DecodeMessage(EncodeMessage(m));
    EXPECT_EQ(back, m) << EncodeMessage(m);
    seen[m.payload.index()] = true;
  }
  for (bool s : seen) EXPECT_TRUE(s);
}

TEST(Protocol, EveryFrameCarriesVersionAndSession) {
  for (const Message& m : AllVariants()) {
    const auto j = nlohmann::json::parse(EncodeMessage(m));
    EXPECT_EQ(j.at("version"), kProtocolVersion);
    EXPECT_EQ(j.at("session"), "abc");
    EXPECT_EQ(j.at("type"), PayloadTag(m.payload));
  }
}

ErrorCode CodeOf(const std::string& frame) {
  try {
    DecodeMessage(frame);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decoded: " << frame;
  return ErrorCode::kUnreachable;
}

TEST(Protocol, TruncatedFrameIsMalformed) {
  const std::string f = EncodeMessage(AllVariants()[6]);
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, f.size() / 2, f.size() - 1}) {
    EXPECT_EQ(CodeOf(f.substr(0, n)), ErrorCode::kMalformedFrame) << n;
  }
}

TEST(Protocol, FutureVersionIsRejectedWithRange) {
  try {
    DecodeMessage(R"({"version":2,"session":"a","type":"start"})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
    EXPECT_NE(std::string(e.what()).find("supported 1..1"), std::string::npos) << e.what();
  }
  EXPECT_EQ(CodeOf(R"({"version":0,"session":"a","type":"start"})"), ErrorCode::kVersionMismatch);
}

TEST(Protocol, UnknownOrIncompleteFramesAreRejected) {
  EXPECT_EQ(CodeOf(R"({"version":1,"session":"a","type":"jump"})"), ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf(R"({"session":"a","type":"start"})"), ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf(R"({"version":1,"type":"start"})"), ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf(R"({"version":1,"session":"a"})"), ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf(R"({"version":"1","session":"a","type":"start"})"), ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf(R"({"version":1,"session":"a","type":"set_drive","amplitude":1,)"
                   R"("swing_duration_s":0.4})"),
            ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf(R"({"version":1,"session":"a","type":"set_drive","amplitude":"big",)"
                   R"("swing_duration_s":0.4,"stance_ticks":0})"),
            ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf(R"({"version":1,"session":"a","type":"push","twist_offset":[0.4],)"
                   R"("duration_s":0.1})"),
            ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf(R"({"version":1,"session":"a","type":"event","kind":"boom",)"
                   R"("tick":1,"detail":""})"),
            ErrorCode::kMalformedFrame);
  EXPECT_EQ(CodeOf("[1,2,3]"), ErrorCode::kMalformedFrame);
}

TEST(Protocol, GoldenFramesDecodeAndReencode) {
  std::ifstream in(LATENT_GAIT_TEST_DATA "/protocol_frames.jsonl");
  ASSERT_TRUE(in.good());
  std::string line;
  int n = 0;
  std::vector<bool> seen(std::variant_size_v<Payload>, false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Message m = DecodeMessage(line);
    seen[m.payload.index()] = true;
    EXPECT_EQ(nlohmann::json::parse(EncodeMessage(m)), nlohmann::json::parse(line)) << line;
    ++n;
  }
  EXPECT_EQ(n, 12);
  for (bool s : seen) EXPECT_TRUE(s);
}

}  // namespace
}  // namespace latent_gait
