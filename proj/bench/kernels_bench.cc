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

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "latent_gait/gait_synthesizer.h"
#include "latent_gait/reference_kernels.h"
#include "latent_gait/vae.h"

namespace latent_gait {
namespace {

struct Fixture {
  VaeModel model;
  TrainingBatch batch;
  Eigen::MatrixXd noise;
};

Fixture MakeFixture(int batch_size) {
  const VaeConfig config = VaeConfig::DeskProfile();
  Fixture f;
  f.model = VaeModel::Create(config, NormalizationStats(Eigen::VectorXd::Zero(config.state_dim),
                                                        Eigen::VectorXd::Ones(config.state_dim)));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  auto fill = [&](Eigen::MatrixXd* m, int rows) {
    m->resize(rows, batch_size);
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
  };
  fill(&f.batch.windows, config.InputSize());
  fill(&f.batch.actions, 3);
  fill(&f.batch.targets, config.OutputSize());
  fill(&f.noise, config.latent);
  f.batch.contacts =
      (Eigen::MatrixXd::Random(config.ContactSize(), batch_size).array() > 0).cast<double>();
  return f;
}

void BM_LossGradReference(benchmark::State& state) {
  const Fixture f = MakeFixture(static_cast<int>(state.range(0)));
  VaeGradient g;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ReferenceLossAndGradient(f.model, f.batch, f.noise, &g));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossGradReference)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_LossGradChunkedSerial(benchmark::State& state) {
  const Fixture f = MakeFixture(static_cast<int>(state.range(0)));
  VaeGradient g;
  for (auto _ : state) {
    benchmark::DoNotOptimize(LossAndGradient(f.model, f.batch, f.noise, &g, Execution::kSerial));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossGradChunkedSerial)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_LossGradParallel(benchmark::State& state) {
  const Fixture f = MakeFixture(static_cast<int>(state.range(0)));
  VaeGradient g;
  for (auto _ : state) {
    benchmark::DoNotOptimize(LossAndGradient(f.model, f.batch, f.noise, &g, Execution::kParallel));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossGradParallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_DatasetGeneration(benchmark::State& state) {
  DatasetConfig config;
  config.n_trajectories = 8;
  config.duration = 5.0;
  const RobotDescription robot;
  const Execution mode = state.range(0) ? Execution::kParallel : Execution::kSerial;
  for (auto _ : state) {
    benchmark::DoNotOptimize(GenerateTrotDataset(config, robot, mode));
  }
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_DatasetGeneration)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace latent_gait

BENCHMARK_MAIN();
