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

#include <cmath>
#include <set>

#include "semfi/denoiser.hpp"
#include "semfi/errors.hpp"
#include "semfi/sampler.hpp"
#include "semfi/schedule.hpp"
#include "semfi/trainer.hpp"
#include "test_util.hpp"

namespace semfi {
namespace {

using testing::micro_config;
using testing::random_clip;
using testing::random_image;

template <class T>
Volume<T> random_volume(int n, int h, int w, int c, std::uint64_t seed) {
    Rng rng(seed);
    Volume<T> v(n, h, w, c);
    for (auto& x : v.data) x = static_cast<T>(rng.normal());
    return v;
}

template <class T>
void randomize_b(MoLStateT<T>& mol, std::uint64_t seed) {
    Rng rng(seed);
    for (const auto& name : mol.parameter_names()) {
        if (name.back() != 'B') continue;
        auto& m = mol.parameter(name);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(0.3 * rng.normal());
    }
}

TEST(Patchify, TokenCountMatchesPatchGrid) {
    const Volume<float> x = random_volume<float>(4, 8, 8, 8, 1);
    EXPECT_EQ(patchify(x, PatchSize{1, 4, 4}).rows(), 16);
    const Volume<float> y = random_volume<float>(8, 16, 16, 1, 2);
    EXPECT_EQ(patchify(y, PatchSize{2, 4, 4}).rows(), 64);
}

TEST(Patchify, RoundTripIsExact) {
    const Volume<float> x = random_volume<float>(8, 16, 16, 3, 3);
    const PatchSize p{2, 4, 4};
    const Volume<float> back = unpatchify(patchify(x, p), p, 8, 16, 16, 3);
    EXPECT_EQ(back.data, x.data);
}

TEST(Patchify, NamesOffendingAxis) {
    const Volume<float> x = random_volume<float>(5, 8, 8, 1, 4);
    try {
        patchify(x, PatchSize{2, 4, 4});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("frame"), std::string::npos) << e.what();
    }
    const Volume<float> y = random_volume<float>(4, 8, 6, 1, 4);
    try {
        patchify(y, PatchSize{1, 4, 4});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("width"), std::string::npos) << e.what();
    }
}

class DenoiserTest : public ::testing::Test {
protected:
    DenoiserConfig cfg = micro_config();
    Denoiser<double> model{cfg, 5};
    VideoClip clip = random_clip(5, 8, 8, 2, 6);
    TextEmbedding text = model.text_encoder().encode("red circle moves right");
    GuidancePack pack =
        build_guidance_pack(clip.frame(0), clip.frame(4), 5, model.codec(), model.image_encoder());
    Volume<double> noisy = random_volume<double>(5, 8, 8, 2, 7);
};

TEST_F(DenoiserTest, OutputShapeMatchesInput) {
    const auto out = model.forward(noisy, 10, text, pack, nullptr, 5);
    EXPECT_TRUE(out.same_shape(noisy));
    for (double v : out.data) EXPECT_TRUE(std::isfinite(v));
}

TEST_F(DenoiserTest, ZeroWeightsGiveZeroPrediction) {
    ParamMap<double> zero = model.params();
    for (auto& [name, m] : zero) m.setZero();
    Denoiser<double> z(cfg, zero);
    const auto out = z.forward(noisy, 3, text, pack, nullptr, 5);
    for (double v : out.data) EXPECT_EQ(v, 0.0);
}

TEST_F(DenoiserTest, ForwardIsDeterministic) {
    const auto a = model.forward(noisy, 17, text, pack, nullptr, 5);
    const auto b = model.forward(noisy, 17, text, pack, nullptr, 5);
    EXPECT_EQ(a.data, b.data);
}

TEST_F(DenoiserTest, FreshAdaptersAreNeutral) {
    MoLConfig mc;
    mc.rank = 2;
    mc.scales = {5, 9};
    const auto mol = init_mol<double>(model.lora_layers(), mc, 9);
    const auto base = model.forward(noisy, 12, text, pack, nullptr, 5);
    const auto with = model.forward(noisy, 12, text, pack, &mol, 5);
    EXPECT_EQ(base.data, with.data);
}

TEST_F(DenoiserTest, TimestepOutOfRangeThrows) {
    EXPECT_THROW(model.forward(noisy, -1, text, pack, nullptr, 5), RangeError);
    EXPECT_THROW(model.forward(noisy, cfg.noise_steps, text, pack, nullptr, 5), RangeError);
}

TEST_F(DenoiserTest, PackFrameMismatchThrows) {
    const auto bad = build_guidance_pack(clip.frame(0), clip.frame(4), 4, model.codec(), model.image_encoder());
    EXPECT_THROW(model.forward(noisy, 1, text, bad, nullptr, 5), ShapeError);
}

TEST_F(DenoiserTest, MergedModelMatchesUnmergedForward) {
    MoLConfig mc;
    mc.rank = 2;
    mc.scales = {5, 9};
    auto mol = init_mol<double>(model.lora_layers(), mc, 9);
    randomize_b(mol, 10);
    const auto unmerged = model.forward(noisy, 20, text, pack, &mol, 5);
    const auto merged = model.merged(mol, 5).forward(noisy, 20, text, pack, nullptr, 5);
    for (std::size_t i = 0; i < merged.size(); ++i) EXPECT_NEAR(merged.data[i], unmerged.data[i], 1e-9);
}

TEST_F(DenoiserTest, OutputShapeClosureOverConfigs) {
    Rng rng(44);
    for (int trial = 0; trial < 6; ++trial) {
        DenoiserConfig c = micro_config();
        c.patch = {static_cast<int>(rng.uniform_int(1, 2)), 2 * static_cast<int>(rng.uniform_int(1, 2)), 4};
        c.num_heads = static_cast<int>(rng.uniform_int(1, 2)) * 2;
        c.num_layers = static_cast<int>(rng.uniform_int(1, 3));
        c.latent_pool = static_cast<int>(rng.uniform_int(1, 2));
        c.validate();
        Denoiser<float> m(c, trial);
        const int n = 2 * static_cast<int>(rng.uniform_int(1, 4));
        const auto cl = random_clip(n, 8, 8, 2, trial);
        const auto pk = build_guidance_pack(cl.frame(0), cl.frame(n - 1), n, m.codec(), m.image_encoder());
        const auto x = random_volume<float>(n, c.latent_height(), c.latent_width(), 2, trial);
        const auto out = m.forward(x, 0, m.text_encoder().encode(""), pk, nullptr, n);
        EXPECT_TRUE(out.same_shape(x)) << "trial " << trial;
    }
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

TEST(GradientCheck, AdapterGradientsMatchFiniteDifferences) {
    const auto cfg = micro_config();
    Denoiser<double> model(cfg, 21);
    MoLConfig mc;
    mc.rank = 2;
    mc.scales = {5, 9};
    auto mol = init_mol<double>(model.lora_layers(), mc, 22);
    randomize_b(mol, 23);
    std::vector<TrainingExample> batch;
    for (int i = 0; i < 2; ++i) {
        const auto c = random_clip(5, 8, 8, 2, 30 + i);
        batch.push_back({c, model.text_encoder().encode("blue square moves up")});
    }
    StepOptions opts;
    const auto names = trainable_names(model, &mol, opts, 5);
    Gradients<double> grads(std::set<std::string>(names.begin(), names.end()));
    batch_loss<double>(model, &mol, batch, opts, 99, &grads);

    Rng pick(5);
    int checked = 0;
    for (const auto& name : names) {
        Mat<double>& w = mol.parameter(name);
        const Mat<double>& g = grads.values().at(name);
        for (int k = 0; k < 2; ++k) {
            const auto idx = static_cast<Eigen::Index>(pick.uniform_int(0, w.size() - 1));
            const double orig = w.data()[idx];
            const double h = 1e-5;
            w.data()[idx] = orig + h;
            const double up = batch_loss<double>(model, &mol, batch, opts, 99, nullptr);
            w.data()[idx] = orig - h;
            const double down = batch_loss<double>(model, &mol, batch, opts, 99, nullptr);
            w.data()[idx] = orig;
            const double fd = (up - down) / (2 * h);
            const double an = g.data()[idx];
            if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
            EXPECT_LT(relative_error(an, fd), 1e-3) << name << "[" << idx << "] analytic " << an << " fd " << fd;
            ++checked;
        }
    }
    EXPECT_GT(checked, 20);
}

TEST(GradientCheck, BaseGradientsMatchFiniteDifferences) {
    auto cfg = micro_config();
    cfg.prediction_target = PredictionTarget::velocity;
    Denoiser<double> model(cfg, 31);
    std::vector<TrainingExample> batch{{random_clip(4, 8, 8, 2, 40), model.text_encoder().encode("green triangle")}};
    StepOptions opts{true, false, false, Conditioning::first_frame};
    Gradients<double> grads = Gradients<double>::all();
    batch_loss<double>(model, nullptr, batch, opts, 7, &grads);
    Rng pick(6);
    int checked = 0;
    for (auto& [name, w] : model.params()) {
        const auto idx = static_cast<Eigen::Index>(pick.uniform_int(0, w.size() - 1));
        const double orig = w.data()[idx];
        const double h = 1e-5;
        w.data()[idx] = orig + h;
        const double up = batch_loss<double>(model, nullptr, batch, opts, 7, nullptr);
        w.data()[idx] = orig - h;
        const double down = batch_loss<double>(model, nullptr, batch, opts, 7, nullptr);
        w.data()[idx] = orig;
        const double fd = (up - down) / (2 * h);
        const auto it = grads.values().find(name);
        const double an = it == grads.values().end() ? 0.0 : it->second.data()[idx];
        if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
        EXPECT_LT(relative_error(an, fd), 1e-3) << name << "[" << idx << "] analytic " << an << " fd " << fd;
        ++checked;
    }
    EXPECT_GT(checked, 20);
}

TEST(TrainingStep, FrozenBaseAndExpertIsolation) {
    const auto cfg = micro_config();
    Denoiser<float> model(cfg, 50);
    MoLConfig mc;
    mc.rank = 2;
    auto mol = init_mol<float>(model.lora_layers(), mc, 51);
    const ParamMap<float> base_before = model.params();
    const MoLState mol_before = mol;
    std::vector<TrainingExample> batch;
    for (int i = 0; i < 2; ++i) batch.push_back({random_clip(9, 8, 8, 2, 60 + i), model.text_encoder().encode("x")});
    AdamW<float> opt(1e-2);
    const double loss = training_step<float>(model, &mol, batch, StepOptions{}, opt, 3, 1.0);
    EXPECT_TRUE(std::isfinite(loss));
    for (const auto& [name, m] : base_before) EXPECT_TRUE(m == model.params().at(name)) << name;
    for (const auto& [s, ad] : mol.experts) {
        bool same = true;
        for (const auto& [layer, f] : ad.layers) {
            const auto& o = mol_before.experts.at(s).layers.at(layer);
            same = same && f.a == o.a && f.b == o.b;
        }
        EXPECT_EQ(same, s != 9) << "expert " << s;
    }
    bool universal_changed = false;
    for (const auto& [layer, f] : mol.universal.layers)
        universal_changed = universal_changed || !(f.b == mol_before.universal.layers.at(layer).b);
    EXPECT_TRUE(universal_changed);
}

TEST(TrainingStep, MixedFrameCountsRejected) {
    const auto cfg = micro_config();
    Denoiser<float> model(cfg, 50);
    MoLConfig mc;
    mc.rank = 2;
    auto mol = init_mol<float>(model.lora_layers(), mc, 51);
    std::vector<TrainingExample> batch{{random_clip(5, 8, 8, 2, 1), {}}, {random_clip(9, 8, 8, 2, 2), {}}};
    AdamW<float> opt(1e-3);
    EXPECT_THROW(training_step<float>(model, &mol, batch, StepOptions{}, opt, 3), BatchError);
}

TEST(Schedule, EndpointsAndReconstruction) {
    const auto s = NoiseSchedule::linear(1000, 1e-4, 0.028);
    EXPECT_NEAR(s.signal(0), 1.0, 1e-3);
    EXPECT_LT(s.signal(999), 1e-3);
    for (int t = 1; t < 1000; ++t) EXPECT_LT(s.noise(t - 1), s.noise(t));
    Rng rng(1);
    std::vector<double> x0(64), eps(64), xt(64), back(64);
    for (auto& v : x0) v = rng.uniform(-1, 1);
    for (auto& v : eps) v = rng.normal();
    for (int t = 0; t < 1000; ++t) {
        s.add_noise<double>(x0, eps, t, xt);
        s.x0_from_eps<double>(xt, eps, t, back);
        for (int i = 0; i < 64; ++i) ASSERT_NEAR(back[i], x0[i], 1e-5) << "t=" << t;
    }
}

TEST(Sampler, ClampedEndpointsAreExact) {
    const auto cfg = micro_config();
    Denoiser<float> model(cfg, 70);
    const Image a = random_image(8, 8, 2, 1), b = random_image(8, 8, 2, 2);
    SampleOptions opts;
    opts.steps = 4;
    opts.clamp_endpoints = true;
    const auto clip = sample<float>(model, a, b, model.text_encoder().encode("t"), 6, nullptr, opts);
    EXPECT_EQ(clip.num_frames(), 6);
    EXPECT_EQ(clip.frame(0), a);
    EXPECT_EQ(clip.frame(5), b);
}

TEST(Sampler, SeedDeterminismAndRange) {
    const auto cfg = micro_config();
    Denoiser<float> model(cfg, 71);
    const Image a = random_image(8, 8, 2, 3), b = random_image(8, 8, 2, 4);
    SampleOptions opts;
    opts.steps = 5;
    opts.seed = 12;
    const auto text = model.text_encoder().encode("t");
    const auto c1 = sample<float>(model, a, b, text, 5, nullptr, opts);
    const auto c2 = sample<float>(model, a, b, text, 5, nullptr, opts);
    EXPECT_EQ(c1.frames.data, c2.frames.data);
    for (float v : c1.frames.data) {
        ASSERT_TRUE(std::isfinite(v));
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
    }
    opts.cfg_scale = 2.0;
    EXPECT_NO_THROW(sample<float>(model, a, b, text, 5, nullptr, opts));
}

TEST(Sampler, RejectsShortClips) {
    const auto cfg = micro_config();
    Denoiser<float> model(cfg, 72);
    const Image a = random_image(8, 8, 2, 3);
    EXPECT_THROW(sample<float>(model, a, a, {}, 1, nullptr, SampleOptions{}), ArgumentError);
}

}  // namespace
}  // namespace semfi
