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
#include <vector>

#include "semfi/video.hpp"

namespace semfi {

/// Image -> fixed-size embedding. Stand-in for a CLIP image tower.
class ImageEncoder {
public:
    virtual ~ImageEncoder() = default;
    virtual std::vector<float> encode(const Image& img) const = 0;
    virtual int dim() const = 0;
};

/// Frozen seeded random projection of the 8x8 area-downsampled grayscale frame.
class RandomProjectionEncoder final : public ImageEncoder {
public:
    RandomProjectionEncoder(int dim, std::uint64_t seed);
    std::vector<float> encode(const Image& img) const override;
    int dim() const override { return dim_; }

private:
    static constexpr int kGrid = 8;
    int dim_;
    std::vector<float> proj_;  // [dim, kGrid*kGrid]
};

/// Pixel <-> latent map used in place of a learned VAE.
///
/// encode: optional p x p average pool, then rescale [0,1] -> [-1,1].
/// decode: rescale back and nearest-neighbour upsample.
class LatentCodec {
public:
    explicit LatentCodec(int pool = 1) : pool_(pool) {}

    Image encode(const Image& img) const;
    Image decode(const Image& latent) const;
    Volume<float> encode(const Volume<float>& frames) const;
    /// Values are clipped to [0,1].
    Volume<float> decode(const Volume<float>& latent) const;

    int pool() const { return pool_; }

private:
    int pool_;
};

}  // namespace semfi
