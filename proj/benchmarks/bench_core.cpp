// Copyright 2026 The semfi Authors
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

#include <vector>

#include "semfi/conditioning.hpp"
#include "semfi/denoiser.hpp"
#include "semfi/flow.hpp"
#include "semfi/lora.hpp"
#include "semfi/metrics.hpp"
#include "semfi/rng.hpp"
#include "semfi/trainer.hpp"

namespace semfi {
namespace {

VideoClip noise_clip(int n, int h, int w, int c, std::uint64_t seed) {
    Rng rng(seed);
    VideoClip clip{Volume<float>(n, h, w, c), 24, ""};
    for (auto& v : clip.frames.data) v = static_cast<float>(rng.uniform());
    return clip;
}

// Default 32x32 model, forward pass with the routed adapters active.
void BM_DenoiserForward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const DenoiserConfig cfg;
    const Denoiser<float> model(cfg, 1);
    const MoLState mol = init_mol<float>(model.lora_layers(), MoLConfig{}, 2);
    const VideoClip clip = noise_clip(n, cfg.image_height, cfg.image_width, cfg.channels, 3);
    const auto pack =
        build_guidance_pack(clip.frame(0), clip.frame(n - 1), n, model.codec(), model.image_encoder());
    const auto x = model.codec().encode(clip.frames);
    const auto text = model.text_encoder().encode("a red circle moves right");
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, 500, text, pack, &mol, n));
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_DenoiserForward)->Arg(5)->Arg(17)->Arg(81)->Unit(benchmark::kMillisecond);

// One adapter-only optimizer step on a batch of 8 clips.
void BM_TrainingStep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const DenoiserConfig cfg;
    Denoiser<float> model(cfg, 1);
    MoLState mol = init_mol<float>(model.lora_layers(), MoLConfig{}, 2);
    std::vector<TrainingExample> batch;
    for (int i = 0; i < 8; ++i)
        batch.push_back({noise_clip(n, cfg.image_height, cfg.image_width, cfg.channels, 10 + i),
                         model.text_encoder().encode("a blue square")});
    AdamW<float> opt(1e-4);
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(training_step<float>(model, &mol, batch, StepOptions{}, opt, ++seed));
}
BENCHMARK(BM_TrainingStep)->Arg(5)->Arg(17)->Unit(benchmark::kMillisecond);

void BM_MergeAdapters(benchmark::State& state) {
    const Denoiser<float> model(DenoiserConfig{}, 1);
    const MoLState mol = init_mol<float>(model.lora_layers(), MoLConfig{}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(model.merged(mol, 33));
}
BENCHMARK(BM_MergeAdapters)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
    const VideoClip c = noise_clip(2, 32, 32, 3, 4);
    const Image a = c.frame(0), b = c.frame(1);
    for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

void BM_PyramidLucasKanade(benchmark::State& state) {
    const VideoClip c = noise_clip(2, 32, 32, 3, 5);
    const Image a = c.frame(0), b = c.frame(1);
    const PyramidLucasKanade lk;
    for (auto _ : state) benchmark::DoNotOptimize(lk.estimate(a, b));
}
BENCHMARK(BM_PyramidLucasKanade);

void BM_PerceptualDistance(benchmark::State& state) {
    const VideoClip c = noise_clip(2, 32, 32, 3, 6);
    const Image a = c.frame(0), b = c.frame(1);
    const RandomConvEmbedder emb(11);
    for (auto _ : state) benchmark::DoNotOptimize(perceptual_distance(a, b, emb));
}
BENCHMARK(BM_PerceptualDistance);

void BM_FrechetDistance(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    Rng rng(7);
    Eigen::MatrixXd x(256, d), y(256, d);
    for (int i = 0; i < x.size(); ++i) {
        x.data()[i] = rng.normal();
        y.data()[i] = rng.normal(0.5, 1.2);
    }
    for (auto _ : state) benchmark::DoNotOptimize(frechet_distance(x, y));
}
BENCHMARK(BM_FrechetDistance)->Arg(24)->Arg(64);

void BM_Route(benchmark::State& state) {
    const std::vector<int> scales{5, 9, 17, 33, 65, 81};
    for (auto _ : state)
        for (int n = 2; n <= 200; ++n) benchmark::DoNotOptimize(route(n, scales));
}
BENCHMARK(BM_Route);

}  // namespace
}  // namespace semfi

BENCHMARK_MAIN();
