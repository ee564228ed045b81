/**
 * Copyright 2026 The p2aug Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include <vector>

#include "p2aug/ad/ops.hpp"
#include "p2aug/ad/tape.hpp"
#include "p2aug/app/config.hpp"
#include "p2aug/app/pose_task.hpp"
#include "p2aug/aug/ops.hpp"
#include "p2aug/net/p2net.hpp"
#include "p2aug/pose/heatmaps.hpp"
#include "p2aug/pose/scene.hpp"
#include "p2aug/rng.hpp"
#include "p2aug/search/policy.hpp"

namespace {

using p2aug::Rng;
using p2aug::ad::Tensor;

Tensor random_tensor(const p2aug::ad::Shape& shape, Rng& rng) {
  std::vector<double> v(p2aug::ad::numel_of(shape));
  for (double& x : v) x = rng.normal();
  return Tensor(shape, std::move(v));
}

// 3x3 convolution, C -> C channels on a 32x32 map, forward and backward.
void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor x = random_tensor({c, 32, 32}, rng), w = random_tensor({c, c, 3, 3}, rng), b = random_tensor({c}, rng);
  for (auto _ : state) {
    p2aug::ad::Tape tape;
    p2aug::ad::Tape::Scope scope(tape);
    x.set_requires_grad(true);
    w.set_requires_grad(true);
    Tensor y = p2aug::ad::sum(p2aug::ad::conv2d(x, w, b, {1, 1, 1}));
    tape.backward(y);
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(8)->Arg(32)->Arg(64);

void BM_WarpAffine(benchmark::State& state) {
  Rng rng(2);
  const Tensor image = random_tensor({1, 64, 64}, rng);
  const Tensor m = Tensor::scalar(0.7);
  for (auto _ : state) {
    Tensor a = p2aug::aug::affine_tensor(p2aug::aug::AugOpKind::Rotate, m, 64, 64);
    benchmark::DoNotOptimize(p2aug::ad::warp_affine(image, a).data().data());
  }
}
BENCHMARK(BM_WarpAffine);

void BM_SceneGeneration(benchmark::State& state) {
  p2aug::pose::SceneSpec spec;
  std::size_t index = 0;
  for (auto _ : state) benchmark::DoNotOptimize(p2aug::pose::generate_sample(spec, index++).scale);
}
BENCHMARK(BM_SceneGeneration);

// Relaxed policy application with gradient to the policy, as in one search step.
void BM_ApplyPolicyBackward(benchmark::State& state) {
  Rng rng(3);
  p2aug::pose::SceneSpec spec;
  const p2aug::aug::Sample sample = p2aug::pose::generate_sample(spec, 0).sample;
  p2aug::search::Policy policy = p2aug::search::Policy::random(8, 2, rng);
  for (auto _ : state) {
    p2aug::ad::Tape tape;
    p2aug::ad::Tape::Scope scope(tape);
    for (Tensor t : policy.parameters()) t.set_requires_grad(true);
    const auto draw = p2aug::search::GumbelDraw::sample(8, 2, rng);
    tape.backward(p2aug::ad::mean(p2aug::search::apply_policy(sample, policy, draw).image));
    benchmark::DoNotOptimize(policy.logits().grad().data());
  }
}
BENCHMARK(BM_ApplyPolicyBackward);

// One training sample through P2Net: forward, loss, backward. Arg: width of C2.
void BM_P2NetTrainingSample(benchmark::State& state) {
  p2aug::app::ExperimentConfig config;
  const auto w = static_cast<std::size_t>(state.range(0));
  config.model.widths = {w, 2 * w, 4 * w, 4 * w};
  p2aug::net::P2Net model(config.net_config(), 4);
  const p2aug::aug::Sample sample = p2aug::pose::generate_sample(config.data.spec.scene, 0).sample;
  for (auto _ : state) {
    p2aug::ad::Tape tape;
    p2aug::ad::Tape::Scope scope(tape);
    for (Tensor t : model.parameters().tensors()) t.set_requires_grad(true);
    tape.backward(p2aug::app::sample_training_loss(model, sample, config));
  }
  state.counters["params"] = static_cast<double>(model.parameters().scalar_count());
}
BENCHMARK(BM_P2NetTrainingSample)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_FlipAverageDecode(benchmark::State& state) {
  Rng rng(5);
  const Tensor maps = random_tensor({5, 16, 16}, rng), flipped = random_tensor({5, 16, 16}, rng);
  const auto pairs = p2aug::pose::flip_pairs(5);
  for (auto _ : state) {
    const Tensor avg = p2aug::pose::smooth_and_flip_average(maps, flipped, pairs, 1.0);
    benchmark::DoNotOptimize(p2aug::pose::decode_keypoints(avg).data());
  }
}
BENCHMARK(BM_FlipAverageDecode);

}  // namespace

BENCHMARK_MAIN();
