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

#include "semfi/lora.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <utility>

#include "semfi/errors.hpp"
#include "semfi/rng.hpp"

namespace semfi {

std::string universal_prefix() { return "mol/universal/"; }
std::string expert_prefix(int s) { return "mol/expert_" + std::to_string(s) + "/"; }

int route(int n, std::span<const int> scales) {
    if (scales.empty()) throw ConfigError("expert frame-count set S is empty");
    int best = scales.front();
    long best_dist = std::numeric_limits<long>::max();
    for (int s : scales) {
        const long d = std::labs(static_cast<long>(n) - s);
        if (d < best_dist || (d == best_dist && s < best)) {
            best = s;
            best_dist = d;
        }
    }
    return best;
}

template <class T>
Mat<T> LoraAdapterT<T>::delta(const std::string& layer) const {
    const auto it = layers.find(layer);
    if (it == layers.end()) throw ConfigError("adapter does not cover layer '" + layer + "'");
    return scale * (it->second.b * it->second.a);
}

template <class T>
bool LoraAdapterT<T>::covers_same_layers(const LoraAdapterT& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (const auto& [name, f] : layers) {
        const auto it = other.layers.find(name);
        if (it == other.layers.end()) return false;
        if (it->second.a.cols() != f.a.cols() || it->second.b.rows() != f.b.rows()) return false;
    }
    return true;
}

template <class T>
const LoraAdapterT<T>* MoLStateT<T>::expert_for(int n) const {
    if (!experts_enabled) return nullptr;
    const int s = route(n, scales);
    const auto it = experts.find(s);
    if (it == experts.end()) throw ConfigError("no expert adapter for s=" + std::to_string(s));
    return &it->second;
}

template <class T>
LoraAdapterT<T>* MoLStateT<T>::expert_for(int n) {
    return const_cast<LoraAdapterT<T>*>(std::as_const(*this).expert_for(n));
}

template <class T>
std::vector<std::string> MoLStateT<T>::parameter_names() const {
    std::vector<std::string> names;
    auto add = [&](const std::string& prefix, const LoraAdapterT<T>& ad) {
        for (const auto& [layer, f] : ad.layers) {
            names.push_back(prefix + layer + "/A");
            names.push_back(prefix + layer + "/B");
        }
    };
    add(universal_prefix(), universal);
    for (const auto& [s, ad] : experts) add(expert_prefix(s), ad);
    std::sort(names.begin(), names.end());
    return names;
}

template <class T>
const Mat<T>& MoLStateT<T>::parameter(const std::string& name) const {
    const auto bad = [&] { return FormatError("unknown adapter parameter '" + name + "'"); };
    if (name.rfind("mol/", 0) != 0) throw bad();
    const auto slash = name.find('/', 4);
    const auto last = name.rfind('/');
    if (slash == std::string::npos || last <= slash) throw bad();
    const std::string group = name.substr(4, slash - 4);
    const std::string layer = name.substr(slash + 1, last - slash - 1);
    const std::string which = name.substr(last + 1);
    const LoraAdapterT<T>* ad = nullptr;
    if (group == "universal") {
        ad = &universal;
    } else if (group.rfind("expert_", 0) == 0) {
        const auto it = experts.find(std::atoi(group.c_str() + 7));
        if (it != experts.end()) ad = &it->second;
    }
    if (!ad) throw bad();
    const auto it = ad->layers.find(layer);
    if (it == ad->layers.end()) throw bad();
    if (which == "A") return it->second.a;
    if (which == "B") return it->second.b;
    throw bad();
}

template <class T>
Mat<T>& MoLStateT<T>::parameter(const std::string& name) {
    return const_cast<Mat<T>&>(std::as_const(*this).parameter(name));
}

template <class T>
template <class U>
MoLStateT<U> MoLStateT<T>::cast() const {
    auto conv = [](const LoraAdapterT<T>& ad) {
        LoraAdapterT<U> out;
        out.rank = ad.rank;
        out.scale = static_cast<U>(ad.scale);
        for (const auto& [name, f] : ad.layers) out.layers[name] = {f.a.template cast<U>(), f.b.template cast<U>()};
        return out;
    };
    MoLStateT<U> out;
    out.universal = conv(universal);
    for (const auto& [s, ad] : experts) out.experts[s] = conv(ad);
    out.scales = scales;
    out.experts_enabled = experts_enabled;
    return out;
}

template <class T>
LoraAdapterT<T> init_adapter(const std::vector<LayerShape>& layers, int rank, double alpha, std::uint64_t seed) {
    if (rank < 1) throw ConfigError("LoRA rank must be >= 1");
    LoraAdapterT<T> ad;
    ad.rank = rank;
    ad.scale = static_cast<T>(alpha / rank);
    Rng root(seed);
    for (const auto& l : layers) {
        if (rank > std::min(l.d_in, l.d_out))
            throw ConfigError("LoRA rank " + std::to_string(rank) + " exceeds min(d_in, d_out) of layer '" + l.name + "'");
        Rng rng = root.split(l.name);
        LoraFactors<T> f;
        f.a.resize(rank, l.d_in);
        for (Eigen::Index i = 0; i < f.a.size(); ++i) f.a.data()[i] = static_cast<T>(rng.normal(0.0, 1.0 / rank));
        f.b = Mat<T>::Zero(l.d_out, rank);
        ad.layers.emplace(l.name, std::move(f));
    }
    return ad;
}

template <class T>
MoLStateT<T> init_mol(const std::vector<LayerShape>& layers, const MoLConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng root(seed);
    MoLStateT<T> mol;
    mol.scales = cfg.scales;
    mol.experts_enabled = cfg.enabled;
    mol.universal = init_adapter<T>(layers, cfg.rank, cfg.alpha, root.split("universal").key());
    if (cfg.enabled) {
        for (int s : cfg.scales)
            mol.experts.emplace(s, init_adapter<T>(layers, cfg.rank, cfg.alpha, root.split(expert_prefix(s)).key()));
    }
    return mol;
}

template <class T>
std::map<std::string, Mat<T>> effective_delta(const MoLStateT<T>& mol, int n) {
    const LoraAdapterT<T>* expert = mol.expert_for(n);
    if (expert && !mol.universal.covers_same_layers(*expert))
        throw ConfigError("universal and expert adapters cover different layers");
    std::map<std::string, Mat<T>> out;
    for (const auto& [name, f] : mol.universal.layers) {
        Mat<T> d = mol.universal.delta(name);
        if (expert) d += expert->delta(name);
        out.emplace(name, std::move(d));
    }
    return out;
}

template <class T>
ColVec<T> apply_lora(const Mat<T>& base, const Mat<T>& delta, const ColVec<T>& x) {
    if (base.rows() != delta.rows() || base.cols() != delta.cols()) throw ShapeError("delta shape differs from base weight");
    if (base.cols() != x.size()) throw ShapeError("input length does not match weight columns");
    return (base + delta) * x;
}

template <class T>
ColVec<T> apply_lora_unmerged(const Mat<T>& base, std::span<const LoraAdapterT<T>* const> adapters,
                              const std::string& layer, const ColVec<T>& x) {
    if (base.cols() != x.size()) throw ShapeError("input length does not match weight columns");
    ColVec<T> y = base * x;
    for (const auto* ad : adapters) {
        if (!ad) continue;
        const auto it = ad->layers.find(layer);
        if (it == ad->layers.end()) throw ConfigError("adapter does not cover layer '" + layer + "'");
        if (it->second.b.rows() != base.rows() || it->second.a.cols() != base.cols())
            throw ShapeError("adapter factors do not match base weight for '" + layer + "'");
        y += ad->scale * (it->second.b * (it->second.a * x));
    }
    return y;
}

template <class T>
std::vector<std::string> trainable_parameters(const MoLStateT<T>& mol, int n) {
    std::vector<std::string> names;
    auto add = [&](const std::string& prefix, const LoraAdapterT<T>& ad) {
        for (const auto& [layer, f] : ad.layers) {
            names.push_back(prefix + layer + "/A");
            names.push_back(prefix + layer + "/B");
        }
    };
    add(universal_prefix(), mol.universal);
    if (mol.experts_enabled) {
        const int s = route(n, mol.scales);
        if (const auto it = mol.experts.find(s); it != mol.experts.end()) add(expert_prefix(s), it->second);
    }
    std::sort(names.begin(), names.end());
    return names;
}

#define SEMFI_INSTANTIATE_LORA(T)                                                                              \
    template struct LoraAdapterT<T>;                                                                           \
    template struct MoLStateT<T>;                                                                              \
    template LoraAdapterT<T> init_adapter<T>(const std::vector<LayerShape>&, int, double, std::uint64_t);     \
    template MoLStateT<T> init_mol<T>(const std::vector<LayerShape>&, const MoLConfig&, std::uint64_t);       \
    template std::map<std::string, Mat<T>> effective_delta<T>(const MoLStateT<T>&, int);                      \
    template ColVec<T> apply_lora<T>(const Mat<T>&, const Mat<T>&, const ColVec<T>&);                          \
    template ColVec<T> apply_lora_unmerged<T>(const Mat<T>&, std::span<const LoraAdapterT<T>* const>,         \
                                              const std::string&, const ColVec<T>&);                          \
    template std::vector<std::string> trainable_parameters<T>(const MoLStateT<T>&, int);

SEMFI_INSTANTIATE_LORA(float)
SEMFI_INSTANTIATE_LORA(double)
#undef SEMFI_INSTANTIATE_LORA

template MoLStateT<double> MoLStateT<float>::cast<double>() const;
template MoLStateT<float> MoLStateT<double>::cast<float>() const;

}  // namespace semfi
