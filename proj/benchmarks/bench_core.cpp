// Copyright 2026 The qear Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <vector>

#include "qear/mclt.hpp"
#include "qear/rng.hpp"
#include "qear/synthgen.hpp"
#include "qear/vae.hpp"

namespace {

using namespace qear;

void BM_McltForward(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Mclt mclt(AnalysisConfig::make(m));
  Rng rng(1);
  std::vector<double> frame(2 * m);
  for (double& v : frame) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    auto coeffs = mclt.forward(frame);
    benchmark::DoNotOptimize(coeffs);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(2 * m));
}
BENCHMARK(BM_McltForward)->Arg(256)->Arg(1024)->Arg(4096);

void BM_McltRoundTrip(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Mclt mclt(AnalysisConfig::make(m));
  Rng rng(2);
  std::vector<double> frame(2 * m);
  for (double& v : frame) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    auto back = mclt.inverse(mclt.forward(frame));
    benchmark::DoNotOptimize(back);
  }
}
BENCHMARK(BM_McltRoundTrip)->Arg(1024);

void BM_Analyze31994(benchmark::State& state) {
  const auto config = AnalysisConfig::make(1024);
  Rng rng(3);
  AudioSegment segment;
  segment.samples.sample_rate = 48000;
  segment.samples.left.resize(31994);
  segment.samples.right.resize(31994);
  for (std::size_t i = 0; i < 31994; ++i) {
    segment.samples.left[i] = rng.uniform(-1.0, 1.0);
    segment.samples.right[i] = rng.uniform(-1.0, 1.0);
  }
  for (auto _ : state) {
    auto tensor = analyze(segment, config);
    benchmark::DoNotOptimize(tensor);
  }
}
BENCHMARK(BM_Analyze31994);

void BM_VaeTrainStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  TrainingConfig config;
  config.latent_dim = 20;
  config.hidden_dims = {512, 128};
  ModelParams params = init_model(config, 4096);

  Rng rng(4);
  Eigen::MatrixXd x(4096, batch), noise(20, batch);
  for (int c = 0; c < batch; ++c) {
    for (int r = 0; r < 4096; ++r) x(r, c) = rng.uniform(-1.0, 1.0);
    for (int r = 0; r < 20; ++r) noise(r, c) = rng.normal();
  }
  VaeNet grads;
  for (auto _ : state) {
    auto parts = vae_batch_loss(params, x, noise, 1e-3, &grads);
    benchmark::DoNotOptimize(parts);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_VaeTrainStep)->Arg(16)->Arg(64);

void BM_SynthGenerate(benchmark::State& state) {
  const auto profile = preset_by_name("crusher");
  for (auto _ : state) {
    auto signal = generate(profile, 1.0, 48000, 5);
    benchmark::DoNotOptimize(signal);
  }
}
BENCHMARK(BM_SynthGenerate);

}  // namespace

BENCHMARK_MAIN();
