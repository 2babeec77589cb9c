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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "semfi/errors.hpp"
#include "semfi/metrics.hpp"
#include "semfi/pipeline.hpp"
#include "semfi/synth.hpp"
#include "test_util.hpp"

namespace semfi {
namespace {

using testing::constant_clip;
using testing::random_clip;
using testing::random_image;

const RandomConvEmbedder& conv() {
    static const RandomConvEmbedder e(11);
    return e;
}

Image noisy_copy(const Image& img, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    Image out = img;
    for (auto& v : out.data) v += static_cast<float>(sigma * rng.normal());
    return out;
}

VideoClip static_clip(int n, std::uint64_t seed) {
    const Image f = random_image(16, 16, 3, seed);
    VideoClip c{Volume<float>(n, 16, 16, 3), 24, ""};
    for (int i = 0; i < n; ++i) c.set_frame(i, f);
    return c;
}

TEST(Psnr, IdentityAndNoise) {
    const Image a = random_image(64, 64, 3, 1);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
    Image base(64, 64, 3, 0.5f);
    EXPECT_NEAR(psnr(base, noisy_copy(base, 0.1, 2)), 20.0, 0.2);
    EXPECT_THROW(psnr(a, Image(64, 63, 3)), ShapeError);
    EXPECT_NEAR(psnr(Image(8, 8, 3, 0.0f), Image(8, 8, 3, 0.5f)), 10.0 * std::log10(4.0), 1e-9);
    const Image b = random_image(64, 64, 3, 9);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(Ssim, MatchesReferenceImplementation) {
    // constant 0.5 against 0.5 + deterministic uniform noise (std 0.01);
    // reference: skimage structural_similarity(win_size=7, data_range=1,
    // use_sample_covariance=True, gaussian_weights=False)
    Image a(32, 32, 1, 0.5f), b(32, 32, 1);
    for (std::uint64_t k = 0; k < 32 * 32; ++k) {
        const double u = static_cast<double>((k * 2654435761ull + 12345ull) % (1ull << 32)) / 4294967296.0;
        b.data[k] = static_cast<float>(0.5 + (u - 0.5) * 2.0 * 0.01 * std::sqrt(3.0));
    }
    EXPECT_NEAR(ssim(a, b), 0.8983060138314047, 1e-4);

    Image r(32, 32, 1), r2(32, 32, 1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double v = (x / 31.0 + y / 31.0) / 2.0;
            r.at(y, x, 0) = static_cast<float>(v);
            r2.at(y, x, 0) = static_cast<float>(v * v);
        }
    EXPECT_NEAR(ssim(r, r2), 0.7341927524742177, 1e-4);
    EXPECT_NEAR(ssim(r, r), 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(ssim(r, r2), ssim(r2, r));
    EXPECT_LT(ssim(a, b), 1.0);
    EXPECT_THROW(ssim(Image(6, 6, 1), Image(6, 6, 1)), ArgumentError);
}

TEST(Perceptual, ZeroOnIdenticalAndPositiveOtherwise) {
    const VideoClip a = random_clip(4, 16, 16, 3, 1), b = random_clip(4, 16, 16, 3, 2);
    EXPECT_EQ(perceptual_distance(a, a, conv()), 0.0);
    EXPECT_GT(perceptual_distance(a, b, conv()), 0.0);
    EXPECT_THROW(perceptual_distance(a, random_clip(5, 16, 16, 3, 1), conv()), PairingError);
}

TEST(Perceptual, NonNegativeOnRandomPairs) {
    for (int t = 0; t < 1000; ++t)
        ASSERT_GE(perceptual_distance(random_image(8, 8, 3, 2 * t), random_image(8, 8, 3, 2 * t + 1), conv()), 0.0);
}

TEST(Perceptual, MedianGrowsWithNoise) {
    double prev = -1.0;
    for (double sigma : {0.01, 0.05, 0.1}) {
        std::vector<double> d;
        for (int t = 0; t < 50; ++t) {
            const Image img = random_image(16, 16, 3, 100 + t);
            d.push_back(perceptual_distance(img, noisy_copy(img, sigma, 200 + t), conv()));
        }
        std::nth_element(d.begin(), d.begin() + 25, d.end());
        EXPECT_GT(d[25], prev) << sigma;
        prev = d[25];
    }
}

TEST(Frechet, EqualCovarianceReducesToMeanGap) {
    Rng rng(4);
    Eigen::MatrixXd x(200, 5);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    x.col(1) += 0.5 * x.col(0);
    Eigen::RowVectorXd shift(5);
    shift << 0.3, -1.0, 0.25, 2.0, 0.0;
    const Eigen::MatrixXd y = x.rowwise() + shift;
    EXPECT_NEAR(frechet_distance(x, y), shift.squaredNorm(), 1e-4);
    EXPECT_NEAR(frechet_distance(x, x), 0.0, 1e-6);
    EXPECT_THROW(frechet_distance(x.topRows(1), y.topRows(1)), StatisticsError);
    Eigen::MatrixXd z(150, 5);
    for (int i = 0; i < z.size(); ++i) z.data()[i] = rng.normal(0.2, 1.5);
    EXPECT_NEAR(frechet_distance(x, z), frechet_distance(z, x), 1e-8);
}

TEST(Frechet, FeatureDistanceZeroOnIdenticalFrames) {
    const auto frames = frames_of(random_clip(6, 16, 16, 3, 5));
    EXPECT_NEAR(frechet_feature_distance(frames, frames, conv()), 0.0, 1e-6);
    EXPECT_THROW(frechet_feature_distance({frames[0]}, {frames[1]}, conv()), StatisticsError);
}

TEST(TemporalFlickering, Examples) {
    EXPECT_EQ(temporal_flickering(static_clip(5, 1)), 1.0);
    EXPECT_NEAR(temporal_flickering(constant_clip({0.0f, 1.0f, 0.0f}, 4, 4, 1)), 0.0, 1e-12);
    EXPECT_NEAR(temporal_flickering(constant_clip({0.0f, 0.5f, 1.0f}, 4, 4, 1)), 0.5, 1e-7);
    EXPECT_NEAR(temporal_flickering(constant_clip({0.0f, 0.1f, 0.2f}, 4, 4, 1)), 0.9, 1e-7);
    EXPECT_THROW(temporal_flickering(static_clip(1, 1)), ArgumentError);
}

TEST(TemporalScores, InvariantToGlobalOffset) {
    VideoClip c = random_clip(7, 8, 8, 3, 4);
    for (auto& v : c.frames.data) v *= 0.5f;
    VideoClip shifted = c;
    for (auto& v : shifted.frames.data) v += 0.25f;
    const AverageInterpolator avg;
    EXPECT_NEAR(temporal_flickering(shifted), temporal_flickering(c), 1e-6);
    EXPECT_NEAR(motion_smoothness(shifted, avg), motion_smoothness(c, avg), 1e-6);
}

TEST(MotionSmoothness, StaticAndImpulse) {
    const AverageInterpolator avg;
    EXPECT_EQ(motion_smoothness(static_clip(7, 2), avg), 1.0);
    // one of the three odd frames gets +1 on a quarter of its pixels
    VideoClip c = constant_clip({0, 0, 0, 0, 0, 0, 0}, 4, 4, 1);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) c.frames.at(3, y, x, 0) = 1.0f;
    EXPECT_NEAR(motion_smoothness(c, avg), 1.0 - 0.25 / 3.0, 1e-7);
    EXPECT_THROW(motion_smoothness(static_clip(2, 1), avg), ArgumentError);

    const VideoClip ramp = constant_clip({0.0f, 0.125f, 0.25f, 0.375f, 0.5f, 0.625f, 0.75f}, 4, 4, 3);
    EXPECT_EQ(motion_smoothness(ramp, avg), 1.0);
}

TEST(MotionSmoothness, FlowWarpHandlesTranslation) {
    DataConfig d;
    d.height = d.width = 32;
    const auto v = synth_corpus_video(d, 3, 1);
    const VideoClip clip = [&] {
        VideoClip c{Volume<float>(9, 32, 32, 3), 24, ""};
        for (int i = 0; i < 9; ++i) c.set_frame(i, v.clip.frame(i));
        return c;
    }();
    const PyramidLucasKanade lk;
    const FlowWarpInterpolator warp(lk);
    const double s = motion_smoothness(clip, warp);
    EXPECT_GT(s, 0.9);
    EXPECT_LE(s, 1.0);
}

TEST(DynamicDegree, StaticIsZeroMovingIsPositive) {
    const PyramidLucasKanade lk;
    EXPECT_EQ(dynamic_degree(static_clip(4, 3), lk), 0.0);
    DataConfig d;
    d.height = d.width = 32;
    const auto v = synth_corpus_video(d, 3, 2);
    EXPECT_GT(dynamic_degree(v.clip, GlobalShiftFlow(4)), -1e-12);
    EXPECT_THROW(dynamic_degree(static_clip(1, 3), lk), ArgumentError);
}

VideoClip translating_clip(int n, int step) {
    const Image base = random_image(24, 24, 1, 17);
    VideoClip c{Volume<float>(n, 24, 24, 1), 24, ""};
    for (int i = 0; i < n; ++i) {
        Image f(24, 24, 1);
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x) f.at(y, x, 0) = base.at(y, ((x - i * step) % 24 + 24) % 24, 0);
        c.set_frame(i, f);
    }
    return c;
}

TEST(DynamicDegree, IdealFlowMeasuresTranslationSpeed) {
    const GlobalShiftFlow ideal(4);
    EXPECT_NEAR(dynamic_degree(translating_clip(5, 2), ideal), 2.0, 1e-12);
    EXPECT_NEAR(dynamic_degree(translating_clip(5, 3), ideal), 3.0 * dynamic_degree(translating_clip(5, 1), ideal),
                1e-12);
}

TEST(FrameFidelity, ExactEndpoints) {
    const VideoClip c = random_clip(5, 16, 16, 3, 8);
    const auto ff = frame_fidelity(c, c.frame(0), c.frame(4), conv());
    EXPECT_EQ(ff.psnr_mean(), kPsnrCap);
    EXPECT_NEAR(ff.ssim_mean(), 1.0, 1e-9);
    EXPECT_EQ(ff.perceptual_mean(), 0.0);

    // middle frames do not matter
    VideoClip other = random_clip(5, 16, 16, 3, 9);
    other.set_frame(0, c.frame(0));
    other.set_frame(4, c.frame(4));
    EXPECT_NEAR(frame_fidelity(other, c.frame(0), c.frame(4), conv()).ssim_mean(), 1.0, 1e-9);

    Image base(64, 64, 3, 0.5f);
    VideoClip g{Volume<float>(3, 64, 64, 3), 24, ""};
    g.set_frame(0, noisy_copy(base, 0.1, 31));
    g.set_frame(2, noisy_copy(base, 0.1, 32));
    const auto n = frame_fidelity(g, base, base, conv());
    EXPECT_NEAR(n.psnr_first, 20.0, 0.2);
    EXPECT_NEAR(n.psnr_last, 20.0, 0.2);
    EXPECT_THROW(frame_fidelity(g, Image(8, 8, 3), base, conv()), ShapeError);
}

TEST(SemanticFidelity, OwnCaptionBeatsShuffledCaption) {
    const DataConfig d;
    const auto probe = ToyProbeEmbedder::fit(d, 11, 240);
    int wins = 0;
    for (int i = 0; i < 50; ++i) {
        const auto v = synth_test_video(d, 123, i);
        const auto w = synth_test_video(d, 123, (i + 17) % 50);
        const int f = v.clip.num_frames();
        const VideoClip c = cut(v.clip, f / 2 - 16, 33);
        wins += semantic_fidelity(c, procedural_caption(v.scene), probe) >
                        semantic_fidelity(c, procedural_caption(w.scene), probe)
                    ? 1
                    : 0;
    }
    EXPECT_GE(wins, 45) << wins << "/50";
}

class FixedEmbedder final : public JointEmbedder {
public:
    FixedEmbedder(std::vector<float> v, std::vector<float> t) : v_(std::move(v)), t_(std::move(t)) {}
    std::vector<float> embed_video(const VideoClip&) const override { return v_; }
    std::vector<float> embed_text(const std::string&) const override { return t_; }

private:
    std::vector<float> v_, t_;
};

TEST(SemanticFidelity, CosineIdentities) {
    const VideoClip c = random_clip(2, 4, 4, 3, 1);
    EXPECT_NEAR(semantic_fidelity(c, "", FixedEmbedder({1, 2, 3}, {1, 2, 3})), 1.0, 1e-12);
    EXPECT_NEAR(semantic_fidelity(c, "", FixedEmbedder({1, 0, 0}, {0, 5, 0})), 0.0, 1e-12);
    EXPECT_THROW(semantic_fidelity(c, "", FixedEmbedder({0, 0, 0}, {1, 0, 0})), DegenerateFeatureError);
}

TEST(Predictors, NotConfigured) {
    const VideoClip c = random_clip(3, 8, 8, 3, 1);
    EXPECT_THROW(aesthetic_quality(c), NotConfiguredError);
    EXPECT_THROW(imaging_quality(c), NotConfiguredError);
}

}  // namespace
}  // namespace semfi
