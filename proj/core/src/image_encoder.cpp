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

#include "semfi/image_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "semfi/errors.hpp"
#include "semfi/rng.hpp"

namespace semfi {

RandomProjectionEncoder::RandomProjectionEncoder(int dim, std::uint64_t seed) : dim_(dim) {
    if (dim <= 0) throw ConfigError("image encoder dim must be positive");
    Rng rng = Rng(seed).split("image_encoder");
    proj_.resize(static_cast<std::size_t>(dim) * kGrid * kGrid);
    for (auto& v : proj_) v = static_cast<float>(rng.normal(0.0, 1.0 / kGrid));
}

std::vector<float> RandomProjectionEncoder::encode(const Image& img) const {
    const Image small = area_resize(to_gray(img), kGrid, kGrid);
    std::vector<float> out(dim_, 0.0f);
    for (int d = 0; d < dim_; ++d) {
        const float* row = proj_.data() + static_cast<std::size_t>(d) * kGrid * kGrid;
        double acc = 0.0;
        for (int k = 0; k < kGrid * kGrid; ++k) acc += static_cast<double>(row[k]) * small.data[k];
        out[d] = static_cast<float>(acc);
    }
    return out;
}

Image LatentCodec::encode(const Image& img) const {
    if (img.height % pool_ != 0 || img.width % pool_ != 0) throw ShapeError("frame size not divisible by latent pool");
    Image lat = pool_ == 1 ? img : area_resize(img, img.height / pool_, img.width / pool_);
    for (auto& v : lat.data) v = 2.0f * v - 1.0f;
    return lat;
}

Image LatentCodec::decode(const Image& latent) const {
    Image out(latent.height * pool_, latent.width * pool_, latent.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < out.channels; ++c)
                out.at(y, x, c) = std::clamp(0.5f * (latent.at(y / pool_, x / pool_, c) + 1.0f), 0.0f, 1.0f);
    return out;
}

Volume<float> LatentCodec::encode(const Volume<float>& frames) const {
    if (frames.height % pool_ != 0 || frames.width % pool_ != 0) throw ShapeError("frame size not divisible by latent pool");
    Volume<float> out(frames.frames, frames.height / pool_, frames.width / pool_, frames.channels);
    for (int n = 0; n < frames.frames; ++n) set_frame(out, n, encode(frame_of(frames, n)));
    return out;
}

Volume<float> LatentCodec::decode(const Volume<float>& latent) const {
    Volume<float> out(latent.frames, latent.height * pool_, latent.width * pool_, latent.channels);
    for (int n = 0; n < latent.frames; ++n) set_frame(out, n, decode(frame_of(latent, n)));
    return out;
}

}  // namespace semfi
