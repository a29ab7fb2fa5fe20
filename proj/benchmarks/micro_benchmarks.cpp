/********************************************************************************
* Copyright 2026 The DFPN Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*    http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
********************************************************************************/

#include <benchmark/benchmark.h>

#include <random>

#include "dfpn/data.hpp"
#include "dfpn/inference.hpp"
#include "dfpn/trainer.hpp"

namespace {

using namespace dfpn;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = u(rng);
    return Tensor::from_values(std::move(shape), std::move(v));
}

void BM_Conv2d3x3(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto channels = static_cast<std::size_t>(state.range(1));
    const Tensor x = random_tensor({1, channels, side, side}, 1);
    const ConvParams p{random_tensor({channels, channels, 3, 3}, 2), random_tensor({channels}, 3), 1, 1};
    NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, p));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(9 * channels * channels * side * side));
}
BENCHMARK(BM_Conv2d3x3)->Args({32, 16})->Args({16, 64})->Args({8, 64});

void BM_Conv2dBackward(benchmark::State& state) {
    const Tensor x = random_tensor({1, 64, 16, 16}, 4);
    ConvParams p{random_tensor({64, 64, 3, 3}, 5), random_tensor({64}, 6), 1, 1};
    p.weight.set_requires_grad(true);
    for (auto _ : state) {
        sum(conv2d(x, p)).backward();
        p.weight.zero_grad();
    }
}
BENCHMARK(BM_Conv2dBackward);

void BM_Nms(benchmark::State& state) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(0.0, 200.0), side(4.0, 60.0), score(0.0, 1.0);
    std::uniform_int_distribution<int> cls(1, 3);
    std::vector<Detection> candidates(static_cast<std::size_t>(state.range(0)));
    for (auto& d : candidates) {
        const double x = pos(rng), y = pos(rng);
        d = {{x, y, x + side(rng), y + side(rng)}, cls(rng), score(rng)};
    }
    for (auto _ : state) benchmark::DoNotOptimize(nms(candidates, 0.5));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Nms)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_DetectorForward(benchmark::State& state) {
    const auto side = static_cast<std::size_t>(state.range(0));
    const Detector det(ModelManifest{}, 1);
    const Tensor image = random_tensor({1, 3, side, side}, 8);
    NoGradGuard no_grad;
    for (auto _ : state) benchmark::DoNotOptimize(det.forward(image));
}
BENCHMARK(BM_DetectorForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Detect(benchmark::State& state) {
    const Detector det(ModelManifest{}, 1);
    const Tensor image = generate_synthetic(SyntheticConfig{}, 1)[0].image;
    for (auto _ : state) benchmark::DoNotOptimize(detect(image, det));
}
BENCHMARK(BM_Detect)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    SyntheticConfig data;
    data.classes = {ShapeKind::Disc, ShapeKind::Square};
    const Sample sample = generate_synthetic(data, 1)[0];
    Detector det(ModelManifest{}, 1);
    TrainConfig cfg;
    cfg.sgd.learning_rate = 0.0;
    Trainer trainer(det, cfg);
    for (auto _ : state) benchmark::DoNotOptimize(trainer.step(sample));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
