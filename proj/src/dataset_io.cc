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

#include "latent_gait/dataset_io.h"

#include <fstream>

#include "json.hpp"
#include "latent_gait/error.h"

namespace latent_gait {
namespace {

GaitPhase ParsePhase(const std::string& name) {
  for (GaitPhase p :
       {GaitPhase::kFullA, GaitPhase::kSwingLfRh, GaitPhase::kFullB, GaitPhase::kSwingRfLh}) {
    if (name == GaitPhaseName(p)) return p;
  }
  throw Error(ErrorCode::kCorruptFile, "unknown gait phase " + name);
}

}  // namespace

void WriteDatasetJsonl(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  nlohmann::json header = {
      {"type", "header"},
      {"version", kDatasetFormatVersion},
      {"robot_hash", dataset.robot_hash},
      {"gait", dataset.config.gait.ToJson()},
      {"state_dim", dataset.state_dim},
      {"control_frequency", dataset.config.gait.control_frequency},
      {"config", dataset.config.ToJson()},
  };
  out << header.dump() << '\n';
  for (std::size_t t = 0; t < dataset.trajectories.size(); ++t) {
    const Trajectory& traj = dataset.trajectories[t];
    nlohmann::json segments = nlohmann::json::array();
    for (const auto& s : traj.segments) {
      segments.push_back(
          {{"start_tick", s.start_tick}, {"twist", {s.twist.x(), s.twist.y(), s.twist.z()}}});
    }
    out << nlohmann::json{{"type", "trajectory"},
                          {"index", t},
                          {"seed", traj.seed},
                          {"length", traj.size()},
                          {"segments", segments}}
               .dump()
        << '\n';
    for (int k = 0; k < traj.size(); ++k) {
      nlohmann::json tick;
      tick["traj"] = t;
      tick["k"] = k;
      tick["phase"] = GaitPhaseName(traj.phases[k]);
      std::vector<double> x(traj.states.col(k).data(),
                            traj.states.col(k).data() + traj.states.rows());
      tick["x"] = x;
      tick["s"] = {traj.contacts[k][0], traj.contacts[k][1], traj.contacts[k][2],
                   traj.contacts[k][3]};
      tick["a"] = {traj.actions(0, k), traj.actions(1, k), traj.actions(2, k)};
      out << tick.dump() << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

Dataset ReadDatasetJsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  Dataset dataset;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kCorruptFile, "empty dataset");
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("type") != "header") {
      throw Error(ErrorCode::kCorruptFile, "missing header record");
    }
    if (header.at("version").get<int>() != kDatasetFormatVersion) {
      throw Error(ErrorCode::kVersionMismatch, "unsupported dataset version");
    }
    dataset.config = DatasetConfig::FromJson(header.at("config"));
    dataset.robot_hash = header.at("robot_hash").get<std::string>();
    dataset.state_dim = header.at("state_dim").get<int>();

    Trajectory* current = nullptr;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      if (rec.contains("type") && rec["type"] == "trajectory") {
        dataset.trajectories.emplace_back();
        current = &dataset.trajectories.back();
        const int length = rec.at("length").get<int>();
        current->seed = rec.at("seed").get<std::uint64_t>();
        current->states.resize(dataset.state_dim, length);
        current->actions.resize(3, length);
        current->contacts.resize(length);
        current->phases.resize(length);
        for (const auto& s : rec.at("segments")) {
          const auto& tw = s.at("twist");
          current->segments.push_back(
              {s.at("start_tick").get<int>(),
               Vec3(tw[0].get<double>(), tw[1].get<double>(), tw[2].get<double>())});
        }
        continue;
      }
      if (current == nullptr) throw Error(ErrorCode::kCorruptFile, "tick before trajectory");
      const int k = rec.at("k").get<int>();
      if (k < 0 || k >= current->size()) {
        throw Error(ErrorCode::kCorruptFile, "tick index out of range");
      }
      const auto& x = rec.at("x");
      if (static_cast<int>(x.size()) != dataset.state_dim) {
        throw Error(ErrorCode::kCorruptFile, "state width mismatch");
      }
      for (int d = 0; d < dataset.state_dim; ++d) current->states(d, k) = x[d].get<double>();
      const auto& s = rec.at("s");
      for (int i = 0; i < kNumLegs; ++i) current->contacts[k][i] = s[i].get<bool>();
      const auto& a = rec.at("a");
      for (int i = 0; i < 3; ++i) current->actions(i, k) = a[i].get<double>();
      current->phases[k] = ParsePhase(rec.at("phase").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, path + ": " + e.what());
  }
  return dataset;
}

void WriteDatasetCsv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.precision(17);
  out << "traj,k,phase";
  for (int d = 0; d < dataset.state_dim; ++d) out << ",x" << d;
  out << ",s_LF,s_RF,s_LH,s_RH,a_x,a_y,a_yaw\n";
  for (std::size_t t = 0; t < dataset.trajectories.size(); ++t) {
    const Trajectory& traj = dataset.trajectories[t];
    for (int k = 0; k < traj.size(); ++k) {
      out << t << ',' << k << ',' << GaitPhaseName(traj.phases[k]);
      for (int d = 0; d < dataset.state_dim; ++d) out << ',' << traj.states(d, k);
      for (int i = 0; i < kNumLegs; ++i) out << ',' << (traj.contacts[k][i] ? 1 : 0);
      for (int i = 0; i < 3; ++i) out << ',' << traj.actions(i, k);
      out << '\n';
    }
  }
}

}  // namespace latent_gait
