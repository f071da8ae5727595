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

// Runs the built latent_gait binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace {

namespace fs = std::filesystem;

int RunCli(const std::string& args) {
  const std::string cmd = std::string(LATENT_GAIT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("latent_gait_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "small.json") << R"({"dataset": {"n_trajectories": 2, "duration": 3.0}})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

TEST_F(CliTest, NoArgumentsIsUsageError) { EXPECT_EQ(RunCli(""), 2); }

TEST_F(CliTest, UnknownSubcommandIsUsageError) { EXPECT_EQ(RunCli("fly"), 2); }

TEST_F(CliTest, GenerateIsReproducibleForASeed) {
  const std::string cfg = "--config " + (dir_ / "small.json").string();
  ASSERT_EQ(RunCli("generate " + cfg + " --seed 7 --out " + (dir_ / "a").string()), 0);
  ASSERT_EQ(RunCli("generate " + cfg + " --seed 7 --out " + (dir_ / "b").string()), 0);
  ASSERT_EQ(RunCli("generate " + cfg + " --seed 8 --out " + (dir_ / "c").string()), 0);
  const std::string a = Slurp(dir_ / "a" / "dataset.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, Slurp(dir_ / "b" / "dataset.jsonl"));
  EXPECT_NE(a, Slurp(dir_ / "c" / "dataset.jsonl"));
}

TEST_F(CliTest, MissingModelIsDomainError) {
  EXPECT_EQ(
      RunCli("run --model " + (dir_ / "nope.lgvae").string() + " --out " + (dir_ / "o").string()),
      1);
}

TEST_F(CliTest, BadConfigValuesAreUsageErrors) {
  std::ofstream(dir_ / "bad.json") << R"({"dataset": {"n_trajectories": 0}})";
  EXPECT_EQ(RunCli("generate --config " + (dir_ / "bad.json").string() + " --out " +
                   (dir_ / "o").string()),
            2);
}

}  // namespace
