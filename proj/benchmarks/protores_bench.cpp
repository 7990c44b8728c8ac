// Copyright 2026 The protores Authors
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

#include <benchmark/benchmark.h>

#include <random>

#include "protores/bench.hpp"
#include "protores/kinematics.hpp"
#include "protores/model.hpp"
#include "protores/solve.hpp"
#include "protores/synthetic.hpp"
#include "protores/training.hpp"

namespace {

using namespace protores;

ModelConfig desk_config(std::size_t width) {
  ModelConfig c;
  c.width = width;
  c.joint_count = 64;
  return c;
}

EffectorSet random_effectors(const SkeletonSpec& skel, std::size_t n, std::uint64_t seed) {
  SyntheticConfig sc;
  sc.clips = 1;
  sc.frames_per_clip = 1;
  sc.seed = seed;
  const auto data = generate_synthetic_dataset(skel, sc);
  Rng rng(seed);
  TrainConfig tc;
  tc.augment_mirror = false;
  tc.augment_rotate_y = false;
  return prepare_batch_item(data.frames[0], skel, n, rng, tc).effectors;
}

void BM_ForwardKinematics(benchmark::State& state) {
  const auto skel = SkeletonSpec::humanoid64();
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Mat3> locals;
  for (std::size_t j = 0; j < skel.size(); ++j) {
    locals.push_back(quaternion_to_matrix(Quat(n(rng), n(rng), n(rng), n(rng))));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_kinematics(skel, Vec3(0, 1, 0), locals));
  }
}
BENCHMARK(BM_ForwardKinematics);

void BM_Rotation6d(benchmark::State& state) {
  Vec6 r;
  r << 0.9, 0.1, -0.2, 0.05, 1.1, 0.3;
  for (auto _ : state) {
    r[0] += 1e-12;
    benchmark::DoNotOptimize(rotation6d_to_matrix(r));
  }
}
BENCHMARK(BM_Rotation6d);

// Single interactive solve; the desk-scale latency budget applies at width 256.
void BM_Solve(benchmark::State& state) {
  const auto skel = SkeletonSpec::humanoid64();
  ModelRegistry registry;
  registry.add("m", std::make_shared<const Model>(desk_config(static_cast<std::size_t>(state.range(0))), skel, 1));
  SolveRequest req;
  req.model = "m";
  req.effectors = random_effectors(skel, static_cast<std::size_t>(state.range(1)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(registry, req));
  }
}
BENCHMARK(BM_Solve)->Args({256, 6})->Args({256, 16})->Args({1024, 6})->Unit(benchmark::kMillisecond);

void BM_ForwardBatch(benchmark::State& state) {
  const auto skel = SkeletonSpec::humanoid64();
  const Model model(desk_config(256), skel, 1);
  std::vector<EffectorSet> sets;
  for (int i = 0; i < state.range(0); ++i) sets.push_back(random_effectors(skel, 8, static_cast<std::uint64_t>(i)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(model_forward_batch(model, sets));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBatch)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_TrainingStep(benchmark::State& state) {
  const auto skel = SkeletonSpec::humanoid64();
  ModelConfig mc = desk_config(static_cast<std::size_t>(state.range(0)));
  mc.encoder_blocks = 2;
  mc.gpd_blocks = 1;
  mc.ikd_blocks = 1;
  Model model(mc, skel, 1);
  SyntheticConfig sc;
  sc.clips = 8;
  sc.frames_per_clip = 8;
  const auto data = generate_synthetic_dataset(skel, sc);
  TrainConfig tc;
  tc.batch_size = 32;
  auto opt = make_optimizer_state(model.parameters());
  Rng rng(2);
  for (auto _ : state) {
    const auto batch = sample_batch(data, skel, rng, tc);
    benchmark::DoNotOptimize(training_step(model, batch, opt, tc, rng));
  }
}
BENCHMARK(BM_TrainingStep)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_EvaluateBenchmark(benchmark::State& state) {
  const auto skel = SkeletonSpec::humanoid64();
  const Model model(desk_config(256), skel, 1);
  SyntheticConfig sc;
  sc.clips = 10;
  sc.frames_per_clip = 10;
  const auto test = generate_synthetic_dataset(skel, sc);
  const auto files = generate_random_benchmark(test, skel, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_model(model, files, test));
  }
  state.SetItemsProcessed(state.iterations() * 7 * static_cast<std::int64_t>(test.size()));
}
BENCHMARK(BM_EvaluateBenchmark)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  protores::retain_freed_memory();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
