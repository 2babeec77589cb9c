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

#include <climits>
#include <cstdlib>

#include "semfi/errors.hpp"
#include "semfi/lora.hpp"
#include "semfi/rng.hpp"

namespace semfi {
namespace {

const std::vector<int> kScales{5, 9, 17, 33, 65, 81};

int brute_force_route(int n, const std::vector<int>& scales) {
    int best = scales.front();
    for (int s : scales)
        if (std::abs(n - s) < std::abs(n - best) || (std::abs(n - s) == std::abs(n - best) && s < best)) best = s;
    return best;
}

Mat<double> random_mat(int r, int c, Rng& rng) {
    Mat<double> m(r, c);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

TEST(Route, Examples) {
    EXPECT_EQ(route(9, kScales), 9);
    EXPECT_EQ(route(100, kScales), 81);
    EXPECT_EQ(route(25, kScales), 17);
    EXPECT_EQ(route(20, kScales), 17);
    EXPECT_EQ(route(70, kScales), 65);
    EXPECT_EQ(route(7, kScales), 5);
}

TEST(Route, MatchesBruteForce) {
    for (int n = 2; n <= 200; ++n) EXPECT_EQ(route(n, kScales), brute_force_route(n, kScales)) << n;
    const std::vector<int> odd{3, 10, 11, 40};
    for (int n = 2; n <= 60; ++n) EXPECT_EQ(route(n, odd), brute_force_route(n, odd)) << n;
}

TEST(Route, EmptySetIsConfigError) { EXPECT_THROW(route(5, std::vector<int>{}), ConfigError); }

TEST(InitAdapter, ShapesAndZeroB) {
    const auto ad = init_adapter<float>({{"w", 64, 64}}, 16, 16.0, 3);
    const auto& f = ad.layers.at("w");
    EXPECT_EQ(f.a.rows(), 16);
    EXPECT_EQ(f.a.cols(), 64);
    EXPECT_EQ(f.b.rows(), 64);
    EXPECT_EQ(f.b.cols(), 16);
    EXPECT_EQ(f.b.sum(), 0.0f);
    EXPECT_FLOAT_EQ(ad.scale, 1.0f);
    EXPECT_TRUE(f.a == init_adapter<float>({{"w", 64, 64}}, 16, 16.0, 3).layers.at("w").a);
    EXPECT_FALSE(f.a == init_adapter<float>({{"w", 64, 64}}, 16, 16.0, 4).layers.at("w").a);
}

TEST(InitAdapter, RankTooLarge) {
    EXPECT_THROW(init_adapter<float>({{"w", 8, 4}}, 5, 5.0, 1), ConfigError);
    EXPECT_THROW(init_adapter<float>({{"w", 8, 4}}, 0, 1.0, 1), ConfigError);
}

TEST(InitAdapter, FreshAdapterIsNeutral) {
    Rng rng(1);
    const auto ad = init_adapter<double>({{"w", 6, 5}}, 2, 2.0, 9);
    const Mat<double> w = random_mat(5, 6, rng);
    const ColVec<double> x = random_mat(6, 1, rng);
    const LoraAdapterT<double>* ads[] = {&ad};
    EXPECT_TRUE(apply_lora_unmerged<double>(w, ads, "w", x) == (w * x).eval());
}

TEST(EffectiveDelta, AdditiveIdentities) {
    MoLConfig cfg;
    cfg.rank = 2;
    cfg.alpha = 2.0;
    const std::vector<LayerShape> layers{{"w", 4, 3}};
    auto mol = init_mol<double>(layers, cfg, 5);
    EXPECT_EQ(effective_delta(mol, 20).at("w").cwiseAbs().sum(), 0.0);

    Rng rng(2);
    mol.universal.layers.at("w").b = random_mat(3, 2, rng);
    const auto d = effective_delta(mol, 20).at("w");
    EXPECT_TRUE(d.isApprox(mol.universal.delta("w"), 1e-12));
}

TEST(EffectiveDelta, HandComputedRankOne) {
    MoLConfig cfg;
    cfg.rank = 1;
    cfg.alpha = 1.0;
    cfg.scales = {5, 9};
    auto mol = init_mol<double>({{"w", 2, 2}}, cfg, 1);
    auto& u = mol.universal.layers.at("w");
    u.a << 1.0, 2.0;
    u.b << 3.0, -1.0;
    auto& e = mol.experts.at(9).layers.at("w");
    e.a << 0.5, -1.0;
    e.b << 2.0, 4.0;
    Mat<double> expected(2, 2);
    // [3,-1]^T [1,2] + [2,4]^T [0.5,-1]
    expected << 3.0 + 1.0, 6.0 - 2.0, -1.0 + 2.0, -2.0 - 4.0;
    const auto d = effective_delta(mol, 8).at("w");
    EXPECT_LT((d - expected).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EffectiveDelta, CoverageMismatch) {
    MoLConfig cfg;
    cfg.rank = 1;
    cfg.scales = {5};
    auto mol = init_mol<double>({{"w", 2, 2}}, cfg, 1);
    mol.experts.at(5).layers.erase("w");
    EXPECT_THROW(effective_delta(mol, 5), ConfigError);
}

TEST(ApplyLora, MergedMatchesUnmerged) {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Mat<double> w = random_mat(16, 16, rng);
        auto u = init_adapter<double>({{"w", 16, 16}}, 4, 8.0, rng.next_u64());
        auto e = init_adapter<double>({{"w", 16, 16}}, 4, 8.0, rng.next_u64());
        u.layers.at("w").b = random_mat(16, 4, rng);
        e.layers.at("w").b = random_mat(16, 4, rng);
        const ColVec<double> x = random_mat(16, 1, rng);
        const Mat<double> delta = u.delta("w") + e.delta("w");
        const LoraAdapterT<double>* ads[] = {&u, &e};
        const ColVec<double> merged = apply_lora<double>(w, delta, x);
        const ColVec<double> unmerged = apply_lora_unmerged<double>(w, ads, "w", x);
        EXPECT_LT((merged - unmerged).cwiseAbs().maxCoeff() / unmerged.cwiseAbs().maxCoeff(), 1e-5);
    }
}

TEST(ApplyLora, IdentitiesAndErrors) {
    Rng rng(3);
    const Mat<double> w = random_mat(3, 4, rng);
    const ColVec<double> x = random_mat(4, 1, rng);
    EXPECT_TRUE(apply_lora<double>(w, Mat<double>::Zero(3, 4), x) == (w * x).eval());
    EXPECT_EQ(apply_lora<double>(w, random_mat(3, 4, rng), ColVec<double>::Zero(4)).cwiseAbs().sum(), 0.0);
    EXPECT_THROW(apply_lora<double>(w, Mat<double>::Zero(4, 3), x), ShapeError);
    EXPECT_THROW(apply_lora<double>(w, Mat<double>::Zero(3, 4), ColVec<double>::Zero(5)), ShapeError);
}

TEST(TrainableParameters, RoutedSubsets) {
    MoLConfig cfg;
    cfg.rank = 1;
    const auto mol = init_mol<float>({{"w", 2, 2}}, cfg, 1);
    const auto names5 = trainable_parameters(mol, 5);
    EXPECT_EQ(names5, (std::vector<std::string>{"mol/expert_5/w/A", "mol/expert_5/w/B", "mol/universal/w/A",
                                                "mol/universal/w/B"}));
    const auto names70 = trainable_parameters(mol, 70);
    EXPECT_EQ(names70, (std::vector<std::string>{"mol/expert_65/w/A", "mol/expert_65/w/B", "mol/universal/w/A",
                                                 "mol/universal/w/B"}));

    MoLConfig single = cfg;
    single.enabled = false;
    const auto u = init_mol<float>({{"w", 2, 2}}, single, 1);
    EXPECT_TRUE(u.experts.empty());
    EXPECT_EQ(trainable_parameters(u, 33), (std::vector<std::string>{"mol/universal/w/A", "mol/universal/w/B"}));
}

TEST(MoLState, ParameterLookup) {
    MoLConfig cfg;
    cfg.rank = 1;
    auto mol = init_mol<float>({{"blk/q", 2, 2}}, cfg, 1);
    EXPECT_EQ(mol.parameter("mol/expert_33/blk/q/B").rows(), 2);
    EXPECT_EQ(mol.parameter_names().size(), 2u * 7u);
    EXPECT_THROW(mol.parameter("mol/expert_34/blk/q/A"), FormatError);
    EXPECT_THROW(mol.parameter("base/blk/q"), FormatError);
}

}  // namespace
}  // namespace semfi
