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

#include <memory>
#include <string>
#include <vector>

#include "semfi/synth.hpp"
#include "semfi/video.hpp"

namespace semfi {

/// Dense per-pixel displacement from frame a to frame b.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<float> u;
    std::vector<float> v;

    FlowField() = default;
    FlowField(int h, int w) : height(h), width(w), u(static_cast<std::size_t>(h) * w), v(u.size()) {}

    /// Mean over pixels of the per-pixel L2 norm.
    double mean_magnitude() const;
};

class FlowEstimator {
public:
    virtual ~FlowEstimator() = default;
    virtual FlowField estimate(const Image& a, const Image& b) const = 0;
    /// Flow between frames i and j of a clip; sequence-aware estimators
    /// override this, the default compares the two frames.
    virtual FlowField estimate_frames(const VideoClip& clip, int i, int j) const {
        return estimate(clip.frame(i), clip.frame(j));
    }
    virtual std::string name() const = 0;
};

/// Coarse-to-fine Lucas-Kanade on grayscale with iterative warping and a
/// small Tikhonov term, so flat regions resolve to zero flow.
class PyramidLucasKanade final : public FlowEstimator {
public:
    explicit PyramidLucasKanade(int levels = 3, int radius = 2, int iterations = 4, double lambda = 1e-4)
        : levels_(levels), radius_(radius), iterations_(iterations), lambda_(lambda) {}
    FlowField estimate(const Image& a, const Image& b) const override;
    std::string name() const override { return "pyramid_lk"; }

private:
    int levels_, radius_, iterations_;
    double lambda_;
};

/// Exhaustive search for the single integer translation (circular shift) that
/// best maps a onto b. Exact for uniformly translated frames.
class GlobalShiftFlow final : public FlowEstimator {
public:
    explicit GlobalShiftFlow(int max_shift = 8) : max_shift_(max_shift) {}
    FlowField estimate(const Image& a, const Image& b) const override;
    std::string name() const override { return "global_shift"; }

private:
    int max_shift_;
};

/// Known displacement from synthetic scene metadata. Frame indices are
/// relative to the clip the scene is attached to (scene.frame_offset).
class SceneFlow final : public FlowEstimator {
public:
    explicit SceneFlow(SynthScene scene) : scene_(std::move(scene)) {}
    /// ArgumentError: a frame pair alone does not identify source frames.
    FlowField estimate(const Image& a, const Image& b) const override;
    FlowField estimate_frames(const VideoClip& clip, int i, int j) const override;
    std::string name() const override { return "ground_truth"; }

private:
    SynthScene scene_;
};

/// ConfigError for unknown names; "ground_truth" needs a scene and is built
/// with SceneFlow directly.
std::unique_ptr<FlowEstimator> make_flow_estimator(const std::string& name);

/// Mean flow magnitude between two frames; ShapeError when shapes differ.
double flow_score(const Image& first, const Image& last, const FlowEstimator& est);
double flow_score(const VideoClip& clip, int i, int j, const FlowEstimator& est);

/// Bilinear sample with border clamping.
float sample_bilinear(const Image& img, int c, float y, float x);
/// Warps b toward a: out(y, x) = b(y + v, x + u).
Image warp(const Image& b, const FlowField& flow);

}  // namespace semfi
