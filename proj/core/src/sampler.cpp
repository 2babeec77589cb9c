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

#include "semfi/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "semfi/errors.hpp"
#include "semfi/rng.hpp"

namespace semfi {

template <class T>
VideoClip sample(const Denoiser<T>& model, const Image& first, const Image& last, const TextEmbedding& text, int n,
                 const MoLStateT<T>* mol, const SampleOptions& opts) {
    const auto& cfg = model.config();
    if (n < 2) throw ArgumentError("need at least 2 frames to interpolate, got " + std::to_string(n));
    if (!first.same_shape(last)) throw ArgumentError("first and last frames differ in shape");
    if (first.height != cfg.image_height || first.width != cfg.image_width || first.channels != cfg.channels)
        throw ArgumentError("endpoint frames are " + std::to_string(first.height) + "x" + std::to_string(first.width) +
                            "x" + std::to_string(first.channels) + ", model expects " + std::to_string(cfg.image_height) +
                            "x" + std::to_string(cfg.image_width) + "x" + std::to_string(cfg.channels));
    if (opts.steps < 1) throw ArgumentError("sample steps must be positive");

    std::optional<Denoiser<T>> merged;
    if (mol) merged.emplace(model.merged(*mol, n));
    const Denoiser<T>& net = merged ? *merged : model;

    const auto& sched = net.schedule();
    const auto& codec = net.codec();
    const GuidancePack pack = build_guidance_pack(first, last, n, codec, net.image_encoder());
    const Image lat_first = codec.encode(first);
    const Image lat_last = codec.encode(last);
    const TextEmbedding empty = net.text_encoder().encode("");
    const bool use_cfg = std::abs(opts.cfg_scale - 1.0) > 1e-12;

    Rng rng = Rng(opts.seed).split("sample");
    Volume<T> x(n, lat_first.height, lat_first.width, lat_first.channels);
    for (auto& v : x.data) v = static_cast<T>(rng.normal());
    const std::size_t fs = x.frame_size();

    const std::vector<int> taus = sched.respaced(opts.steps);
    Volume<T> x0(x.frames, x.height, x.width, x.channels);
    Volume<T> eps(x.frames, x.height, x.width, x.channels);
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const int t = taus[i];
        if (opts.clamp_endpoints) {
            const double a = sched.signal(t), b = sched.noise(t);
            for (std::size_t k = 0; k < fs; ++k) {
                x.data[k] = static_cast<T>(a * lat_first.data[k] + b * rng.normal());
                x.data[(n - 1) * fs + k] = static_cast<T>(a * lat_last.data[k] + b * rng.normal());
            }
        }
        Volume<T> pred = net.forward(x, t, text, pack, nullptr, n);
        if (use_cfg) {
            const Volume<T> uncond = net.forward(x, t, empty, pack, nullptr, n);
            const T s = static_cast<T>(opts.cfg_scale);
            for (std::size_t k = 0; k < pred.size(); ++k) pred.data[k] = uncond.data[k] + s * (pred.data[k] - uncond.data[k]);
        }
        if (cfg.prediction_target == PredictionTarget::velocity) {
            sched.template split_velocity<T>(x.data, pred.data, t, x0.data, eps.data);
        } else {
            sched.template x0_from_eps<T>(x.data, pred.data, t, x0.data);
        }
        for (auto& v : x0.data) v = std::clamp(v, T(-1), T(1));

        if (i + 1 == taus.size()) {
            x = x0;
            break;
        }
        const int tp = taus[i + 1];
        const double ab = sched.alpha_bar(t), abp = sched.alpha_bar(tp);
        const double beta = 1.0 - ab / abp;
        const double c0 = std::sqrt(abp) * beta / (1.0 - ab);
        const double ct = std::sqrt(1.0 - beta) * (1.0 - abp) / (1.0 - ab);
        const double sd = std::sqrt(std::max(0.0, beta * (1.0 - abp) / (1.0 - ab)));
        for (std::size_t k = 0; k < x.size(); ++k)
            x.data[k] = static_cast<T>(c0 * x0.data[k] + ct * x.data[k] + sd * rng.normal());
    }

    Volume<float> lat(x.frames, x.height, x.width, x.channels);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const float v = static_cast<float>(x.data[k]);
        if (!std::isfinite(v)) throw Error("sampler produced a non-finite value");
        lat.data[k] = v;
    }
    VideoClip clip{codec.decode(lat), opts.fps, text.source_text};
    if (opts.clamp_endpoints) {
        clip.set_frame(0, first);
        clip.set_frame(n - 1, last);
    }
    return clip;
}

template VideoClip sample<float>(const Denoiser<float>&, const Image&, const Image&, const TextEmbedding&, int,
                                 const MoLStateT<float>*, const SampleOptions&);
template VideoClip sample<double>(const Denoiser<double>&, const Image&, const Image&, const TextEmbedding&, int,
                                  const MoLStateT<double>*, const SampleOptions&);

}  // namespace semfi
