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

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semfi/embedders.hpp"
#include "semfi/flow.hpp"
#include "semfi/video.hpp"

namespace semfi {

inline constexpr double kPsnrCap = 99.0;

enum class Direction { higher_better, lower_better };

struct MetricResult {
    std::string name;
    double value = 0.0;
    Direction direction = Direction::higher_better;
    std::vector<double> per_clip_values;

    /// Sets value to the mean of per_clip_values.
    void finalize();
};

/// 10 log10(1 / MSE), capped at 99 dB. ShapeError on shape mismatch.
double psnr(const Image& a, const Image& b);
double psnr(const Volume<float>& a, const Volume<float>& b);

/// Mean SSIM over every valid 7x7 window of the grayscale frames (uniform
/// window, sample covariance, k1 = 0.01, k2 = 0.03, data range 1).
/// ArgumentError when a frame is smaller than the window.
double ssim(const Image& a, const Image& b);

/// LPIPS-style: per scale, unit-normalize features across channels, take the
/// squared difference, average spatially; sum over scales.
double perceptual_distance(const Image& a, const Image& b, const PerceptualEmbedder& embedder);
/// Mean over frames. PairingError when frame counts differ.
double perceptual_distance(const VideoClip& a, const VideoClip& b, const PerceptualEmbedder& embedder);

/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2) with sample
/// covariances (rows are samples). StatisticsError below 2 samples.
double frechet_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);
double frechet_feature_distance(const std::vector<Image>& generated, const std::vector<Image>& ground_truth,
                                const FrameEmbedder& embedder);
std::vector<Image> frames_of(const VideoClip& clip);

/// 1 - mean over consecutive pairs of the mean absolute difference.
double temporal_flickering(const VideoClip& clip);

class FrameInterpolator {
public:
    virtual ~FrameInterpolator() = default;
    virtual Image interpolate(const Image& prev, const Image& next) const = 0;
};

class AverageInterpolator final : public FrameInterpolator {
public:
    Image interpolate(const Image& prev, const Image& next) const override;
};

/// Estimates prev -> next flow, warps both halfway and averages.
class FlowWarpInterpolator final : public FrameInterpolator {
public:
    explicit FlowWarpInterpolator(const FlowEstimator& est) : est_(est) {}
    Image interpolate(const Image& prev, const Image& next) const override;

private:
    const FlowEstimator& est_;
};

/// Rebuilds every odd frame that has two even neighbors and returns
/// 1 - mean per-frame MAE. ArgumentError when N < 3.
double motion_smoothness(const VideoClip& clip, const FrameInterpolator& interp);

/// Mean flow magnitude over consecutive pairs. ArgumentError when N < 2.
double dynamic_degree(const VideoClip& clip, const FlowEstimator& est);

struct FrameFidelity {
    double psnr_first = 0.0, psnr_last = 0.0;
    double ssim_first = 0.0, ssim_last = 0.0;
    double perceptual_first = 0.0, perceptual_last = 0.0;

    double psnr_mean() const { return 0.5 * (psnr_first + psnr_last); }
    double ssim_mean() const { return 0.5 * (ssim_first + ssim_last); }
    double perceptual_mean() const { return 0.5 * (perceptual_first + perceptual_last); }
};

/// Metrics at positions 0 and N-1 only.
FrameFidelity frame_fidelity(const VideoClip& generated, const Image& first, const Image& last,
                             const PerceptualEmbedder& embedder);

/// Cosine similarity in the joint space. DegenerateFeatureError on zero embeddings.
double semantic_fidelity(const VideoClip& clip, const std::string& text, const JointEmbedder& embedder);

/// Need pretrained predictors; always throw NotConfiguredError.
double aesthetic_quality(const VideoClip& clip);
double imaging_quality(const VideoClip& clip);

double mean_abs_diff(const Image& a, const Image& b);

}  // namespace semfi
