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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semfi/config.hpp"
#include "semfi/video.hpp"

namespace semfi {

/// Multi-scale feature maps for the perceptual (LPIPS-style) distance.
class PerceptualEmbedder {
public:
    virtual ~PerceptualEmbedder() = default;
    /// One [h, w, channels] map per scale.
    virtual std::vector<Image> feature_maps(const Image& img) const = 0;
};

/// Fixed-length frame descriptor for the Fréchet distance.
class FrameEmbedder {
public:
    virtual ~FrameEmbedder() = default;
    virtual std::vector<float> embed(const Image& img) const = 0;
    virtual int dim() const = 0;
};

/// Seeded random 3x3 convolutions + ReLU over a 2x area pyramid. The frame
/// descriptor is the spatial mean of every channel at every scale.
class RandomConvEmbedder final : public PerceptualEmbedder, public FrameEmbedder {
public:
    explicit RandomConvEmbedder(std::uint64_t seed, int channels = 8, int scales = 3);

    std::vector<Image> feature_maps(const Image& img) const override;
    std::vector<float> embed(const Image& img) const override;
    int dim() const override { return channels_ * scales_; }

private:
    std::vector<float> weights(int in_channels, int scale) const;

    std::uint64_t seed_;
    int channels_;
    int scales_;
};

/// Maps videos and text into a shared space for semantic fidelity.
class JointEmbedder {
public:
    virtual ~JointEmbedder() = default;
    virtual std::vector<float> embed_video(const VideoClip& clip) const = 0;
    virtual std::vector<float> embed_text(const std::string& text) const = 0;
};

/// Hand-built per-color features (coverage, shape compactness, centroid
/// motion, rotation sense, coverage trend) of a synthetic clip.
std::vector<float> toy_video_features(const VideoClip& clip);

/// L2-normalized hashed bag of words.
std::vector<float> bag_of_words(const std::string& text, int buckets);

/// Ridge probe from toy_video_features to the caption's bag of words, fitted
/// on freshly generated synthetic clips.
class ToyProbeEmbedder final : public JointEmbedder {
public:
    ToyProbeEmbedder(Eigen::MatrixXd weights, int buckets) : w_(std::move(weights)), buckets_(buckets) {}

    /// Fits on `clips` synthetic clips drawn from `data` with `seed`.
    static ToyProbeEmbedder fit(const DataConfig& data, std::uint64_t seed, int clips, int buckets = 256,
                                double ridge = 1e-2);

    std::vector<float> embed_video(const VideoClip& clip) const override;
    std::vector<float> embed_text(const std::string& text) const override;

private:
    Eigen::MatrixXd w_;  // [features + 1, buckets]
    int buckets_;
};

}  // namespace semfi
