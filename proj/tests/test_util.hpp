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

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "semfi/config.hpp"
#include "semfi/rng.hpp"
#include "semfi/video.hpp"

namespace semfi::testing {

/// Two-layer model small enough for finite differences.
inline DenoiserConfig micro_config() {
    DenoiserConfig c;
    c.image_height = 8;
    c.image_width = 8;
    c.channels = 2;
    c.latent_pool = 1;
    c.patch = {1, 4, 4};
    c.embed_dim = 8;
    c.num_layers = 2;
    c.num_heads = 2;
    c.ff_mult = 2;
    c.d_text = 4;
    c.max_text_tokens = 3;
    c.text_buckets = 16;
    c.noise_steps = 50;
    c.beta_end = 0.2;
    return c;
}

inline Image random_image(int h, int w, int c, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w, c);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

inline VideoClip random_clip(int n, int h, int w, int c, std::uint64_t seed, const std::string& caption = "red circle") {
    Rng rng(seed);
    VideoClip clip{Volume<float>(n, h, w, c), 24, caption};
    for (auto& v : clip.frames.data) v = static_cast<float>(rng.uniform());
    return clip;
}

inline VideoClip constant_clip(std::initializer_list<float> levels, int h, int w, int c) {
    VideoClip clip{Volume<float>(static_cast<int>(levels.size()), h, w, c), 24, ""};
    int i = 0;
    for (float l : levels) {
        for (auto& v : clip.frames.frame(i)) v = l;
        ++i;
    }
    return clip;
}

/// 16x16 RGB, one transformer layer; trains a handful of steps in well under a second.
inline ExperimentConfig tiny_experiment() {
    ExperimentConfig c;
    c.model.image_height = c.model.image_width = 16;
    c.model.embed_dim = 16;
    c.model.num_layers = 1;
    c.model.num_heads = 2;
    c.model.ff_mult = 2;
    c.model.d_text = 8;
    c.model.text_buckets = 64;
    c.mol.rank = 2;
    c.mol.alpha = 2.0;
    c.data.height = c.data.width = 16;
    c.data.num_videos = 8;
    c.data.test_videos = 1;
    c.data.seed = 2;
    c.train.pretrain_steps = 2;
    c.train.steps = 3;
    c.train.batch_size = 2;
    c.bench.sample_steps = 2;
    c.bench.probe_clips = 16;
    return c;
}

}  // namespace semfi::testing
