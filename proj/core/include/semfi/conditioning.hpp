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

#include <vector>

#include "semfi/errors.hpp"
#include "semfi/image_encoder.hpp"
#include "semfi/video.hpp"

namespace semfi {

/// Dual-endpoint conditioning bundle.
///
/// guidance_frames holds the encoded first frame at position 0, the encoded
/// last frame at position N-1 and exact zeros elsewhere; mask is 1 at the
/// preserved positions and 0 at positions to generate.
struct GuidancePack {
    Volume<float> guidance_frames;
    std::vector<float> mask;
    std::vector<float> cond_embedding;

    int num_frames() const { return guidance_frames.frames; }
};

Volume<float> build_guidance_frames(const Image& first, const Image& last, int n, const LatentCodec& codec);

std::vector<float> build_mask(int n);

/// enc(first) + enc(last), element-wise, before any projection.
std::vector<float> condition_embedding(const Image& first, const Image& last, const ImageEncoder& encoder);

GuidancePack build_guidance_pack(const Image& first, const Image& last, int n, const LatentCodec& codec,
                                 const ImageEncoder& encoder);

/// Single-image (first frame only) variant used to pretrain the base model.
GuidancePack build_first_frame_pack(const Image& first, int n, const LatentCodec& codec, const ImageEncoder& encoder);

/// Channel concat [noisy | guidance | mask] -> C_noisy + C' + 1 channels.
template <class T>
Volume<T> assemble_model_input(const Volume<T>& noisy, const GuidancePack& pack) {
    const auto& g = pack.guidance_frames;
    if (noisy.frames != g.frames)
        throw ShapeError("frame count mismatch: latent has " + std::to_string(noisy.frames) + ", pack has " +
                         std::to_string(g.frames));
    if (noisy.height != g.height || noisy.width != g.width) throw ShapeError("spatial mismatch between latent and pack");
    if (static_cast<int>(pack.mask.size()) != noisy.frames) throw ShapeError("mask length does not match frame count");
    const int cn = noisy.channels, cg = g.channels;
    Volume<T> out(noisy.frames, noisy.height, noisy.width, cn + cg + 1);
    for (int n = 0; n < noisy.frames; ++n) {
        for (int y = 0; y < noisy.height; ++y) {
            for (int x = 0; x < noisy.width; ++x) {
                T* dst = &out.at(n, y, x, 0);
                const T* src = &noisy.at(n, y, x, 0);
                for (int c = 0; c < cn; ++c) dst[c] = src[c];
                const float* gs = &g.at(n, y, x, 0);
                for (int c = 0; c < cg; ++c) dst[cn + c] = static_cast<T>(gs[c]);
                dst[cn + cg] = static_cast<T>(pack.mask[n]);
            }
        }
    }
    return out;
}

/// Inverse of assemble_model_input: copies channels [first, first+count) out.
template <class T>
Volume<T> slice_channels(const Volume<T>& v, int first, int count) {
    if (first < 0 || count < 0 || first + count > v.channels) throw ShapeError("channel slice out of range");
    Volume<T> out(v.frames, v.height, v.width, count);
    const std::size_t pixels = static_cast<std::size_t>(v.frames) * v.height * v.width;
    for (std::size_t p = 0; p < pixels; ++p)
        for (int c = 0; c < count; ++c) out.data[p * count + c] = v.data[p * v.channels + first + c];
    return out;
}

}  // namespace semfi
