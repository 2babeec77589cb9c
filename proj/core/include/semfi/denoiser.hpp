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
#include <memory>
#include <string>
#include <vector>

#include "semfi/conditioning.hpp"
#include "semfi/config.hpp"
#include "semfi/image_encoder.hpp"
#include "semfi/lora.hpp"
#include "semfi/schedule.hpp"
#include "semfi/tensor.hpp"
#include "semfi/text_encoder.hpp"
#include "semfi/video.hpp"

namespace semfi {

/// [N,H,W,C] -> [L, t*h*w*C] with L = (N/t)(H/h)(W/w). Tokens are frame-major,
/// then row-major over the spatial patch grid. ConfigError names the axis that
/// does not divide.
template <class T>
Mat<T> patchify(const Volume<T>& x, const PatchSize& patch);

template <class T>
Volume<T> unpatchify(const Mat<T>& tokens, const PatchSize& patch, int frames, int height, int width, int channels);

/// Row cache for a (possibly LoRA-augmented) linear layer.
template <class T>
struct LinearCache {
    Mat<T> x;
    Mat<T> xa_universal;
    Mat<T> xa_expert;
};

template <class T>
struct NormCache {
    Mat<T> xhat;
    ColVec<T> inv_std;
};

template <class T>
struct AttnCache {
    Mat<T> q, k, v;
    std::vector<Mat<T>> probs;  // one per (group, head)
};

template <class T>
struct BlockCache {
    NormCache<T> n_spatial, n_temporal, n_cross, n_ff;
    LinearCache<T> sq, sk, sv, so, tq, tk, tv, to, cq, ck, cv, co, ff1, ff2;
    AttnCache<T> spatial, temporal, cross;
    Mat<T> ff_pre;
};

/// Activations retained by forward() for backward().
template <class T>
struct ForwardCache {
    int frames = 0;
    int token_frames = 0;
    int spatial_tokens = 0;
    int text_tokens = 0;
    LinearCache<T> embed, time1, time2, ctx_text, ctx_image, out;
    Mat<T> time_pre;
    Mat<T> ctx;
    std::vector<BlockCache<T>> blocks;
    NormCache<T> final_norm;
    const LoraAdapterT<T>* universal = nullptr;
    const LoraAdapterT<T>* expert = nullptr;
    std::string expert_prefix;
};

/// Tiny video diffusion transformer over pixel-space latents.
///
/// Each block runs spatial self-attention within a frame, temporal
/// self-attention across frames at a fixed patch position, cross-attention
/// into [text tokens; summed image-condition token], and a GELU MLP, all
/// pre-norm with residuals. The timestep enters as an MLP embedding added to
/// every token. Attention projections and MLP matrices accept LoRA deltas.
template <class T>
class Denoiser {
public:
    /// Fresh random weights, seeded.
    Denoiser(DenoiserConfig cfg, std::uint64_t seed);
    /// Weights from a checkpoint. FormatError on missing or mis-shaped tensors.
    Denoiser(DenoiserConfig cfg, ParamMap<T> params);

    const DenoiserConfig& config() const { return cfg_; }
    const ParamMap<T>& params() const { return params_; }
    ParamMap<T>& params() { return params_; }
    const NoiseSchedule& schedule() const { return *schedule_; }
    const TextEncoder& text_encoder() const { return *text_; }
    const ImageEncoder& image_encoder() const { return *image_; }
    const LatentCodec& codec() const { return codec_; }

    /// Layers that carry LoRA adapters, in block order.
    std::vector<LayerShape> lora_layers() const;
    std::size_t parameter_count() const;

    /// Prediction with the same shape as `noisy`. With `mol` set, the
    /// universal adapter and the expert routed from target_n are applied.
    Volume<T> forward(const Volume<T>& noisy, int timestep, const TextEmbedding& text, const GuidancePack& pack,
                      const MoLStateT<T>* mol, int target_n, ForwardCache<T>* cache = nullptr) const;

    /// Accumulates d(loss)/d(param) into `grads` for every tracked name.
    void backward(const Volume<T>& grad_out, const ForwardCache<T>& cache, Gradients<T>& grads) const;

    /// Copy whose base weights absorb the effective delta for frame count n.
    Denoiser merged(const MoLStateT<T>& mol, int n) const;

    template <class U>
    Denoiser<U> cast() const;

private:
    struct Adapters {
        const LoraAdapterT<T>* universal = nullptr;
        const LoraAdapterT<T>* expert = nullptr;
        std::string expert_prefix;
    };

    void init_encoders();
    void check_params() const;
    std::vector<std::pair<std::string, std::pair<int, int>>> expected_shapes() const;

    const Mat<T>& p(const std::string& name) const;
    Mat<T> linear(const std::string& name, const Mat<T>& x, const Adapters& ad, LinearCache<T>* c) const;
    Mat<T> linear_backward(const std::string& name, const Mat<T>& dy, const LinearCache<T>& c, const Adapters& ad,
                           Gradients<T>& g, bool need_dx) const;
    Mat<T> positional(int token_frames, int frames) const;

    DenoiserConfig cfg_;
    ParamMap<T> params_;
    std::shared_ptr<const NoiseSchedule> schedule_;
    std::shared_ptr<const TextEncoder> text_;
    std::shared_ptr<const ImageEncoder> image_;
    LatentCodec codec_;
};

extern template class Denoiser<float>;
extern template class Denoiser<double>;

}  // namespace semfi
