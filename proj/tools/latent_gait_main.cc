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

// latent_gait command-line entry point.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "latent_gait/analysis.h"
#include "latent_gait/dataset_io.h"
#include "latent_gait/error.h"
#include "latent_gait/gait_synthesizer.h"
#include "latent_gait/model_io.h"
#include "latent_gait/playback.h"
#include "latent_gait/service.h"
#include "latent_gait/trainer.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace latent_gait {
namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, path + ": " + e.what());
  }
}

void WriteJson(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json LoadConfig(const Common& c) {
  return c.config_path.empty() ? json::object() : ReadJson(c.config_path);
}

fs::path OutDir(const Common& c) {
  fs::create_directories(c.out);
  return fs::path(c.out);
}

RobotDescription Robot(const json& cfg) {
  if (cfg.contains("robot")) return LoadRobotDescription(cfg["robot"].get<std::string>());
  return RobotDescription{};
}

DatasetConfig DatasetFrom(const json& cfg, const Common& c) {
  DatasetConfig d =
      cfg.contains("dataset") ? DatasetConfig::FromJson(cfg["dataset"]) : DatasetConfig{};
  if (c.seed) d.seed = *c.seed;
  return d;
}

VaeConfig VaeFrom(const json& cfg, const Common& c) {
  VaeConfig v = cfg.contains("vae") ? VaeConfig::FromJson(cfg["vae"]) : VaeConfig::DeskProfile();
  if (c.seed) v.seed = *c.seed;
  return v;
}

Dataset DatasetOrGenerate(const std::string& path, const json& cfg, const Common& c) {
  if (!path.empty()) return ReadDatasetJsonl(path);
  std::cerr << "no --data given; generating the configured dataset\n";
  return GenerateTrotDataset(DatasetFrom(cfg, c), Robot(cfg));
}

std::vector<int> Holdout(const Dataset& d, const json& cfg) {
  const int n = static_cast<int>(d.trajectories.size());
  const int k = std::min(n, cfg.value("/train/holdout_trajectories"_json_pointer, 2));
  std::vector<int> ids;
  for (int i = n - k; i < n; ++i) ids.push_back(i);
  return ids;
}

std::vector<int> AllTrajectories(const Dataset& d) {
  std::vector<int> ids(d.trajectories.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return ids;
}

std::string DefaultDrivePath(const std::string& model_path) {
  return (fs::path(model_path).parent_path() / "drive.json").string();
}

DriveIdentification LoadDrive(const std::string& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kIo, "no drive identification at " + path +
                                    " (run `analyze drive` first or pass --drive)");
  }
  return DriveIdentification::FromJson(ReadJson(path));
}

// ---------------------------------------------------------------------------

int Generate(const Common& c) {
  const json cfg = LoadConfig(c);
  const DatasetConfig dc = DatasetFrom(cfg, c);
  const Dataset d = GenerateTrotDataset(dc, Robot(cfg));
  const fs::path out = OutDir(c);
  WriteDatasetJsonl(d, (out / "dataset.jsonl").string());
  std::cout << "wrote " << d.trajectories.size() << " trajectories (" << d.TotalTicks()
            << " ticks) to " << (out / "dataset.jsonl").string() << '\n';
  return 0;
}

int TrainCmd(const Common& c, const std::string& data) {
  const json cfg = LoadConfig(c);
  const Dataset d = DatasetOrGenerate(data, cfg, c);
  const VaeConfig vc = VaeFrom(cfg, c);
  TrainOptions opt;
  opt.holdout_trajectories = cfg.value("/train/holdout_trajectories"_json_pointer, 2);
  opt.log_every = cfg.value("/train/log_every"_json_pointer, 1000);
  opt.on_log = [](const CurveRow& r) {
    std::cerr << "step " << r.step << " mse " << r.loss.mse << " kl " << r.loss.kl << " bce "
              << r.loss.bce << " total " << r.loss.total << '\n';
  };
  const TrainResult r = Train(d, vc, opt);
  const fs::path out = OutDir(c);
  SaveModel(r.model, (out / "model.lgvae").string(), d.robot_hash);
  std::ofstream curve(out / "curve.csv");
  WriteCurveCsv(r.curve, curve);
  const EvalMetrics m = Evaluate(r.model, d, r.holdout_trajectories);
  WriteJson({{"holdout_trajectories", r.holdout_trajectories},
             {"windows", m.windows},
             {"contact_accuracy", m.contact_accuracy},
             {"current_contact_accuracy", m.current_contact_accuracy},
             {"reconstruction_mse", m.reconstruction_mse},
             {"first_block_mse_mean", m.first_block_mse_mean},
             {"first_block_mse_std", m.first_block_mse_std}},
            out / "metrics.json");
  std::cout << "held-out contact accuracy " << m.contact_accuracy << ", reconstruction MSE "
            << m.reconstruction_mse << '\n';
  return 0;
}

int RunCmd(const Common& c, const std::string& model_path, std::string drive_path,
           const std::string& script_path, const std::string& data) {
  const json cfg = LoadConfig(c);
  const VaeModel model = LoadModel(model_path);
  const RobotDescription robot = Robot(cfg);
  RunScript script;
  if (!script_path.empty()) {
    script = RunScript::FromJson(ReadJson(script_path));
  } else {
    if (drive_path.empty()) drive_path = DefaultDrivePath(model_path);
    const DriveIdentification id = LoadDrive(drive_path);
    const double fc = model.config.control_frequency;
    script = NominalScript(id, cfg.value("/run/swing_duration"_json_pointer, 0.4),
                           static_cast<int>(cfg.value("/run/seconds"_json_pointer, 20.0) * fc),
                           cfg.value("/run/stance_ticks"_json_pointer, 0));
    if (cfg.contains("run") && cfg["run"].contains("script")) {
      const RunScript extra = RunScript::FromJson(cfg["run"]["script"]);
      script.commands = extra.commands;
      script.disturbances = extra.disturbances;
    }
  }
  if (c.seed) script.seed = *c.seed;
  PlaybackOptions opt;
  if (!data.empty()) {
    const Dataset d = ReadDatasetJsonl(data);
    opt.prefill = DatasetPrefill(d, 0, model.config.HistoryTicks(), model.config);
  }
  const RunLog log = RunClosedLoop(model, robot, script, opt);
  const fs::path out = OutDir(c);
  WriteRunLogJsonl(log, (out / "run.jsonl").string());
  WriteRunLogCsv(log, (out / "run.csv").string());
  const GaitEvaluation g = EvaluateGait(log, 1);
  WriteJson(g.ToJson(), out / "gait.json");
  std::cout << log.ticks.size() << " ticks, " << g.cycles << " cycles"
            << (log.diverged ? ", diverged: " + log.diverged_reason : std::string()) << '\n';
  return 0;
}

int Analyze(const Common& c, const std::string& which, const std::string& model_path,
            std::string drive_path, const std::string& data, const std::vector<std::string>& logs) {
  const json cfg = LoadConfig(c);
  const fs::path out = OutDir(c);
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw CLI::ValidationError("analyze", what);
  };
  if (drive_path.empty() && !model_path.empty()) drive_path = DefaultDrivePath(model_path);

  if (which == "drive") {
    need(!model_path.empty(), "--model is required");
    const VaeModel model = LoadModel(model_path);
    const Dataset d = DatasetOrGenerate(data, cfg, c);
    const DriveIdentification id = IdentifyDriveDimension(model, d, Holdout(d, cfg));
    WriteJson(id.ToJson(), out / "drive.json");
    std::cout << "drive dim " << id.drive_dim << ", trot dim " << id.trot_dim << ", phase offset "
              << id.phase_offset << " rad, amplitude " << id.amplitude << '\n';
  } else if (which == "clusters") {
    need(!model_path.empty(), "--model is required");
    const VaeModel model = LoadModel(model_path);
    const DriveIdentification id = LoadDrive(drive_path);
    const double u = std::abs(id.amplitude) * 1.2;
    const double v = id.latent_std.size() > id.trot_dim ? 3.0 * id.latent_std(id.trot_dim) : 3.0;
    const Eigen::VectorXd base = id.latent_mean.size() == model.config.latent
                                     ? id.latent_mean
                                     : Eigen::VectorXd::Zero(model.config.latent);
    const LatentClusterMap map = ClusterMapGrid(model, id, base, 41, u, v);
    std::ofstream csv(out / "clusters.csv");
    map.WriteCsv(csv);
    std::cout << map.DistinctLabels() << " distinct stances on the grid\n";
  } else if (which == "saliency") {
    need(!model_path.empty(), "--model is required");
    const VaeModel model = LoadModel(model_path);
    const Dataset d = DatasetOrGenerate(data, cfg, c);
    std::vector<double> phases = {0.25 * M_PI, 0.75 * M_PI, 1.25 * M_PI, 1.75 * M_PI};
    const auto targets = PhaseTargets(model, d, Holdout(d, cfg), phases);
    json rows = json::array();
    for (std::size_t i = 0; i < targets.size(); ++i) {
      SaliencyOptions so;
      if (c.seed) so.seed = *c.seed;
      const SaliencyResult r = SaliencyMap(model, targets[i], so);
      json g;
      for (int k = 0; k < 6; ++k) g[kStateGroupNames[k]] = r.groups[k];
      rows.push_back({{"phase", phases[i]},
                      {"groups", g},
                      {"initial_loss", r.initial_loss},
                      {"final_loss", r.final_loss}});
    }
    WriteJson(rows, out / "saliency.json");
    std::cout << "wrote " << (out / "saliency.json").string() << '\n';
  } else if (which == "zmp") {
    const RobotDescription robot = Robot(cfg);
    json result;
    if (!data.empty() || logs.empty()) {
      const Dataset d = DatasetOrGenerate(data, cfg, c);
      std::vector<double> all;
      for (const auto& tr : d.trajectories) {
        const ZmpSummary z =
            ZmpSupportDistance(tr.states, tr.contacts, d.config.gait.control_frequency, robot);
        for (const auto& r : z.records) all.push_back(std::abs(r.distance));
      }
      result["dataset"] = Summarize(all).ToJson();
    }
    for (const auto& path : logs) {
      const RunLog log = ReadRunLogJsonl(path);
      Eigen::MatrixXd states(log.ticks.empty() ? 0 : log.ticks[0].state.size(),
                             static_cast<Eigen::Index>(log.ticks.size()));
      for (std::size_t i = 0; i < log.ticks.size(); ++i) states.col(i) = log.ticks[i].state;
      const ZmpSummary z =
          ZmpSupportDistance(states, log.ContactLog(), log.control_frequency, robot);
      std::vector<double> all;
      for (const auto& r : z.records) all.push_back(std::abs(r.distance));
      result[path] = Summarize(all).ToJson();
    }
    WriteJson(result, out / "zmp.json");
    std::cout << result.dump(2) << '\n';
  } else if (which == "gait") {
    need(logs.size() == 1, "exactly one --log is required");
    const RunLog log = ReadRunLogJsonl(logs[0]);
    const GaitTiming t = GaitParamDistribution(log.ContactLog(), log.control_frequency, 1);
    WriteJson(t.ToJson(), out / "gait.json");
    std::cout << t.ToJson().dump(2) << '\n';
  } else if (which == "compare") {
    need(logs.size() == 2, "exactly two --log values are required");
    json result;
    std::vector<GaitTiming> t;
    for (const auto& p : logs) {
      const RunLog log = ReadRunLogJsonl(p);
      t.push_back(GaitParamDistribution(log.ContactLog(), log.control_frequency, 1));
    }
    const MannWhitneyResult sw = MannWhitneyU(t[0].swing, t[1].swing);
    const MannWhitneyResult st = MannWhitneyU(t[0].stance, t[1].stance);
    result["swing"] = {{"a", t[0].swing_stats.ToJson()},
                       {"b", t[1].swing_stats.ToJson()},
                       {"u", sw.u},
                       {"p_value", sw.p_value},
                       {"exact", sw.exact}};
    result["stance"] = {{"a", t[0].stance_stats.ToJson()},
                        {"b", t[1].stance_stats.ToJson()},
                        {"u", st.u},
                        {"p_value", st.p_value},
                        {"exact", st.exact}};
    WriteJson(result, out / "compare.json");
    std::cout << result.dump(2) << '\n';
  } else if (which == "threshold") {
    need(!model_path.empty(), "--model is required");
    const VaeModel model = LoadModel(model_path);
    const DriveIdentification id = LoadDrive(drive_path);
    const double fc = model.config.control_frequency;
    const double seconds = cfg.value("/threshold/seconds"_json_pointer, 60.0);
    const RunScript s = NominalScript(id, cfg.value("/run/swing_duration"_json_pointer, 0.4),
                                      static_cast<int>(seconds * fc));
    const RunLog log = RunClosedLoop(model, Robot(cfg), s);
    std::vector<double> elbo;
    for (const auto& t : log.ticks) elbo.push_back(t.elbo);
    const double margin = cfg.value("/threshold/margin"_json_pointer, 1.25);
    const double theta = CalibrateThreshold(elbo, fc, margin);
    WriteJson({{"theta", theta}, {"margin", margin}, {"seconds", seconds}}, out / "theta.json");
    std::cout << "theta " << theta << '\n';
  } else {
    throw CLI::ValidationError("analyze", "unknown analysis '" + which + "'");
  }
  return 0;
}

int Ablate(const Common& c, const std::string& data) {
  const json cfg = LoadConfig(c);
  const Dataset d = DatasetOrGenerate(data, cfg, c);
  AblationOptions opt;
  opt.base = VaeFrom(cfg, c);
  opt.base.steps = cfg.value("/ablation/steps"_json_pointer, opt.base.steps);
  opt.run_seconds = cfg.value("/ablation/run_seconds"_json_pointer, opt.run_seconds);
  opt.swing_duration = cfg.value("/ablation/swing_duration"_json_pointer, opt.swing_duration);
  opt.on_row = [](const AblationRow& r) {
    std::cerr << r.config.label << ": " << (r.passed ? "pass" : "fail " + r.failure) << '\n';
  };
  std::vector<AblationConfig> grid;
  if (cfg.contains("ablation") && cfg["ablation"].contains("grid")) {
    for (const auto& g : cfg["ablation"]["grid"]) {
      AblationConfig a;
      a.latent = g.value("latent", a.latent);
      a.width = g.value("width", a.width);
      a.window = g.value("window", a.window);
      a.encoder_frequency = g.value("encoder_frequency", a.encoder_frequency);
      grid.push_back(a);
    }
  } else {
    for (int latent : {6, 16}) {
      for (int width : {64, 128}) {
        AblationConfig a;
        a.latent = latent;
        a.width = width;
        grid.push_back(a);
      }
    }
  }
  const auto rows = AblationRun(grid, d, Robot(cfg), opt);
  const fs::path out = OutDir(c);
  std::ofstream(out / "ablation.md") << AblationReport(rows);
  std::cout << AblationReport(rows);
  return 0;
}

std::atomic<bool> g_stop{false};

int ServeCmd(const Common& c, const std::string& model_path, std::string drive_path,
             unsigned short port, double theta) {
  const json cfg = LoadConfig(c);
  const VaeModel model = LoadModel(model_path);
  if (drive_path.empty()) drive_path = DefaultDrivePath(model_path);
  const DriveIdentification id = LoadDrive(drive_path);
  const fs::path theta_path = fs::path(model_path).parent_path() / "theta.json";
  if (theta <= 0.0 && fs::exists(theta_path)) theta = ReadJson(theta_path.string()).at("theta");
  RunScript script = NominalScript(id, cfg.value("/run/swing_duration"_json_pointer, 0.4), 0);
  script.theta = theta;
  script.cadence.enabled = cfg.value("/serve/cadence"_json_pointer, true);
  if (c.seed) script.seed = *c.seed;
  SessionOptions so;
  so.trot_dim = id.trot_dim;
  so.telemetry_hz = cfg.value("/serve/telemetry_hz"_json_pointer, 30.0);
  Session session(model, Robot(cfg), script, so);
  ServeOptions opt;
  opt.address = cfg.value("/serve/address"_json_pointer, std::string("127.0.0.1"));
  opt.port = port;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  Serve(session, opt, g_stop, [&](unsigned short p) {
    std::cout << "serving session '" << session.id() << "' on ws://" << opt.address << ':' << p
              << "/ (theta " << theta << ")" << std::endl;
  });
  return 0;
}

void AddCommon(CLI::App* app, Common* c) {
  app->add_option("--config", c->config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c->seed, "Seed overriding the configuration");
  app->add_option("--out", c->out, "Output directory")->capture_default_str();
}

int Main(int argc, char** argv) {
  CLI::App app{"Latent-space gait planning: data, training, playback and analysis"};
  app.require_subcommand(1);
  Common common;
  std::string data, model, drive, script;
  std::vector<std::string> logs;
  std::string which;
  unsigned short port = 8765;
  double theta = 0.0;

  auto* gen = app.add_subcommand("generate", "Synthesize the trot dataset");
  AddCommon(gen, &common);

  auto* train = app.add_subcommand("train", "Train the VAE");
  AddCommon(train, &common);
  train->add_option("--data", data, "Dataset JSONL (generated from the config if omitted)");

  auto* run = app.add_subcommand("run", "Scripted closed-loop playback");
  AddCommon(run, &common);
  run->add_option("--model", model, "Model file")->required();
  run->add_option("--drive", drive, "Drive identification JSON (default: next to the model)");
  run->add_option("--script", script, "RunScript JSON");
  run->add_option("--data", data, "Dataset JSONL used to prefill the buffer");

  auto* analyze = app.add_subcommand("analyze", "Latent and gait analyses");
  AddCommon(analyze, &common);
  analyze->add_option("which", which, "drive|clusters|saliency|zmp|gait|compare|threshold")
      ->required()
      ->check(
          CLI::IsMember({"drive", "clusters", "saliency", "zmp", "gait", "compare", "threshold"}));
  analyze->add_option("--model", model, "Model file");
  analyze->add_option("--drive", drive, "Drive identification JSON");
  analyze->add_option("--data", data, "Dataset JSONL");
  analyze->add_option("--log", logs, "Run log JSONL (repeatable)");

  auto* ablate = app.add_subcommand("ablate", "Capacity ablation");
  AddCommon(ablate, &common);
  ablate->add_option("--data", data, "Dataset JSONL");

  auto* serve = app.add_subcommand("serve", "Live websocket session");
  AddCommon(serve, &common);
  serve->add_option("--model", model, "Model file")->required();
  serve->add_option("--drive", drive, "Drive identification JSON");
  serve->add_option("--port", port, "TCP port")->capture_default_str();
  serve->add_option("--theta", theta, "ELBO threshold (default: theta.json next to the model)");

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return Generate(common);
    if (*train) return TrainCmd(common, data);
    if (*run) return RunCmd(common, model, drive, script, data);
    if (*analyze) return Analyze(common, which, model, drive, data, logs);
    if (*ablate) return Ablate(common, data);
    if (*serve) return ServeCmd(common, model, drive, port, theta);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidParams ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace
}  // namespace latent_gait

int main(int argc, char** argv) { return latent_gait::Main(argc, argv); }
