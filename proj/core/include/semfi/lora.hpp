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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "semfi/config.hpp"
#include "semfi/tensor.hpp"

namespace semfi {

/// Low-rank factors for one target layer: delta = scale * B * A.
template <class T>
struct LoraFactors {
    Mat<T> a;  // [rank, d_in]
    Mat<T> b;  // [d_out, rank]
};

struct LayerShape {
    std::string name;
    int d_in = 0;
    int d_out = 0;
};

template <class T>
struct LoraAdapterT {
    int rank = 0;
    T scale = T(1);
    std::map<std::string, LoraFactors<T>> layers;

    Mat<T> delta(const std::string& layer) const;
    bool covers_same_layers(const LoraAdapterT& other) const;
};

/// One always-on universal adapter plus frame-count experts keyed by s in S.
template <class T>
struct MoLStateT {
    LoraAdapterT<T> universal;
    std::map<int, LoraAdapterT<T>> experts;
    std::vector<int> scales;
    /// false = single-LoRA ablation; only the universal adapter exists.
    bool experts_enabled = true;

    /// Adapter active for target frame count n, or nullptr when experts are off.
    const LoraAdapterT<T>* expert_for(int n) const;
    LoraAdapterT<T>* expert_for(int n);

    /// Every parameter name under the "mol/" namespace, sorted.
    std::vector<std::string> parameter_names() const;
    /// Lookup by "mol/universal/<layer>/A" style names.
    Mat<T>& parameter(const std::string& name);
    const Mat<T>& parameter(const std::string& name) const;

    template <class U>
    MoLStateT<U> cast() const;
};

using LoraAdapter = LoraAdapterT<float>;
using MoLState = MoLStateT<float>;

/// argmin_{s in S} |n - s|, ties toward the smaller s. ConfigError on empty S.
int route(int n, std::span<const int> scales);

/// A ~ N(0, (1/rank)^2), B = 0, scale = alpha / rank.
template <class T>
LoraAdapterT<T> init_adapter(const std::vector<LayerShape>& layers, int rank, double alpha, std::uint64_t seed);

template <class T>
MoLStateT<T> init_mol(const std::vector<LayerShape>& layers, const MoLConfig& cfg, std::uint64_t seed);

/// Per-layer combined delta: universal + routed expert.
template <class T>
std::map<std::string, Mat<T>> effective_delta(const MoLStateT<T>& mol, int n);

/// (base + delta) x
template <class T>
ColVec<T> apply_lora(const Mat<T>& base, const Mat<T>& delta, const ColVec<T>& x);

/// base x + sum_i scale_i B_i (A_i x) without forming the merged matrix.
template <class T>
ColVec<T> apply_lora_unmerged(const Mat<T>& base, std::span<const LoraAdapterT<T>* const> adapters,
                              const std::string& layer, const ColVec<T>& x);

/// Universal parameters plus those of the expert routed from n.
template <class T>
std::vector<std::string> trainable_parameters(const MoLStateT<T>& mol, int n);

std::string universal_prefix();
std::string expert_prefix(int s);

}  // namespace semfi
