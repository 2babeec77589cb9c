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

#include "semfi/conditioning.hpp"

#include <string>

namespace semfi {

Volume<float> build_guidance_frames(const Image& first, const Image& last, int n, const LatentCodec& codec) {
    if (n < 2) throw ArgumentError("guidance frames need N >= 2, got " + std::to_string(n));
    if (!first.same_shape(last)) throw ShapeError("first and last frames differ in shape");
    const Image ef = codec.encode(first);
    const Image el = codec.encode(last);
    Volume<float> g(n, ef.height, ef.width, ef.channels, 0.0f);
    set_frame(g, 0, ef);
    set_frame(g, n - 1, el);
    return g;
}

std::vector<float> build_mask(int n) {
    if (n < 2) throw ArgumentError("mask needs N >= 2, got " + std::to_string(n));
    std::vector<float> m(n, 0.0f);
    m.front() = 1.0f;
    m.back() = 1.0f;
    return m;
}

std::vector<float> condition_embedding(const Image& first, const Image& last, const ImageEncoder& encoder) {
    auto a = encoder.encode(first);
    const auto b = encoder.encode(last);
    if (a.size() != b.size()) throw ShapeError("image encoder returned inconsistent dims");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

GuidancePack build_guidance_pack(const Image& first, const Image& last, int n, const LatentCodec& codec,
                                 const ImageEncoder& encoder) {
    return {build_guidance_frames(first, last, n, codec), build_mask(n), condition_embedding(first, last, encoder)};
}

GuidancePack build_first_frame_pack(const Image& first, int n, const LatentCodec& codec, const ImageEncoder& encoder) {
    if (n < 2) throw ArgumentError("guidance frames need N >= 2");
    const Image ef = codec.encode(first);
    GuidancePack p;
    p.guidance_frames = Volume<float>(n, ef.height, ef.width, ef.channels, 0.0f);
    set_frame(p.guidance_frames, 0, ef);
    p.mask.assign(n, 0.0f);
    p.mask[0] = 1.0f;
    p.cond_embedding = encoder.encode(first);
    return p;
}

}  // namespace semfi
