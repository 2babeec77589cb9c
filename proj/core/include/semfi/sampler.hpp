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

#include "semfi/denoiser.hpp"
#include "semfi/lora.hpp"
#include "semfi/text_encoder.hpp"
#include "semfi/video.hpp"

namespace semfi {

struct SampleOptions {
    int steps = 25;
    /// Re-noise the endpoint latents from the ground truth at every step and
    /// paste the exact endpoint frames into the decoded clip.
    bool clamp_endpoints = false;
    /// 1.0 disables classifier-free guidance.
    double cfg_scale = 1.0;
    std::uint64_t seed = 0;
    int fps = 24;
};

/// Ancestral sampling over a respaced schedule. With `mol` set, the universal
/// adapter and the expert routed from n are merged into the weights first.
/// ArgumentError when n < 2 or the endpoints disagree in shape with the model.
template <class T>
VideoClip sample(const Denoiser<T>& model, const Image& first, const Image& last, const TextEmbedding& text, int n,
                 const MoLStateT<T>* mol, const SampleOptions& opts);

}  // namespace semfi
