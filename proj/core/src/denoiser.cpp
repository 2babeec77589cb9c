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

#include "semfi/denoiser.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "semfi/errors.hpp"
#include "semfi/rng.hpp"

namespace semfi {

namespace {

constexpr double kNormEps = 1e-5;

template <class T>
using StridedMap = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstStridedMap = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;

/// Rows gi*group_stride + i*elem_stride, i < size, form group gi.
struct GroupLayout {
    Eigen::Index count;
    Eigen::Index size;
    Eigen::Index group_stride;
    Eigen::Index elem_stride;
};

template <class T>
Mat<T> layer_norm(const Mat<T>& x, NormCache<T>* c) {
    const Eigen::Index rows = x.rows();
    Mat<T> y(rows, x.cols());
    ColVec<T> inv(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const T mean = x.row(i).mean();
        const auto centered = x.row(i).array() - mean;
        const T var = centered.square().mean();
        const T is = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
        y.row(i) = centered * is;
        inv(i) = is;
    }
    if (c) {
        c->xhat = y;
        c->inv_std = std::move(inv);
    }
    return y;
}

template <class T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const NormCache<T>& c) {
    Mat<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const T mean_dy = dy.row(i).mean();
        const T mean_dy_xhat = dy.row(i).dot(c.xhat.row(i)) / static_cast<T>(dy.cols());
        dx.row(i) = c.inv_std(i) * (dy.row(i).array() - mean_dy - c.xhat.row(i).array() * mean_dy_xhat).matrix();
    }
    return dx;
}

template <class T>
T gelu(T u) {
    const T k = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
    return T(0.5) * u * (T(1) + std::tanh(k * (u + T(0.044715) * u * u * u)));
}

template <class T>
T gelu_grad(T u) {
    const T k = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
    const T th = std::tanh(k * (u + T(0.044715) * u * u * u));
    return T(0.5) * (T(1) + th) + T(0.5) * u * (T(1) - th * th) * k * (T(1) + T(3 * 0.044715) * u * u);
}

template <class T>
T silu(T u) {
    return u / (T(1) + std::exp(-u));
}

template <class T>
T silu_grad(T u) {
    const T s = T(1) / (T(1) + std::exp(-u));
    return s * (T(1) + u * (T(1) - s));
}

template <class T>
void softmax_rows(Mat<T>& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const T mx = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - mx).exp();
        s.row(i) /= s.row(i).sum();
    }
}

/// Multi-head attention where query group gi attends to key/value group gi.
template <class T>
Mat<T> grouped_attention(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v, const GroupLayout& lq,
                         const GroupLayout& lkv, int heads, std::vector<Mat<T>>* probs) {
    const Eigen::Index d = q.cols(), dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    Mat<T> out(q.rows(), d);
    if (probs) probs->assign(static_cast<std::size_t>(lq.count * heads), Mat<T>());
    for (Eigen::Index g = 0; g < lq.count; ++g) {
        ConstStridedMap<T> Q(q.data() + g * lq.group_stride * d, lq.size, d, Eigen::OuterStride<>(lq.elem_stride * d));
        ConstStridedMap<T> K(k.data() + g * lkv.group_stride * d, lkv.size, d, Eigen::OuterStride<>(lkv.elem_stride * d));
        ConstStridedMap<T> V(v.data() + g * lkv.group_stride * d, lkv.size, d, Eigen::OuterStride<>(lkv.elem_stride * d));
        StridedMap<T> O(out.data() + g * lq.group_stride * d, lq.size, d, Eigen::OuterStride<>(lq.elem_stride * d));
        for (int h = 0; h < heads; ++h) {
            Mat<T> s(lq.size, lkv.size);
            s.noalias() = Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose();
            s *= scale;
            softmax_rows(s);
            O.middleCols(h * dh, dh).noalias() = s * V.middleCols(h * dh, dh);
            if (probs) (*probs)[static_cast<std::size_t>(g * heads + h)] = std::move(s);
        }
    }
    return out;
}

template <class T>
void grouped_attention_backward(const Mat<T>& dout, const AttnCache<T>& c, const GroupLayout& lq,
                                const GroupLayout& lkv, int heads, Mat<T>& dq, Mat<T>& dk, Mat<T>& dv) {
    const Eigen::Index d = c.q.cols(), dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    dq = Mat<T>::Zero(c.q.rows(), d);
    dk = Mat<T>::Zero(c.k.rows(), d);
    dv = Mat<T>::Zero(c.v.rows(), d);
    for (Eigen::Index g = 0; g < lq.count; ++g) {
        const auto qs = Eigen::OuterStride<>(lq.elem_stride * d);
        const auto ks = Eigen::OuterStride<>(lkv.elem_stride * d);
        ConstStridedMap<T> Q(c.q.data() + g * lq.group_stride * d, lq.size, d, qs);
        ConstStridedMap<T> K(c.k.data() + g * lkv.group_stride * d, lkv.size, d, ks);
        ConstStridedMap<T> V(c.v.data() + g * lkv.group_stride * d, lkv.size, d, ks);
        ConstStridedMap<T> dO(dout.data() + g * lq.group_stride * d, lq.size, d, qs);
        StridedMap<T> dQ(dq.data() + g * lq.group_stride * d, lq.size, d, qs);
        StridedMap<T> dK(dk.data() + g * lkv.group_stride * d, lkv.size, d, ks);
        StridedMap<T> dV(dv.data() + g * lkv.group_stride * d, lkv.size, d, ks);
        for (int h = 0; h < heads; ++h) {
            const Mat<T>& P = c.probs[static_cast<std::size_t>(g * heads + h)];
            const auto dOh = dO.middleCols(h * dh, dh);
            dV.middleCols(h * dh, dh).noalias() += P.transpose() * dOh;
            Mat<T> dP(P.rows(), P.cols());
            dP.noalias() = dOh * V.middleCols(h * dh, dh).transpose();
            const ColVec<T> r = (P.array() * dP.array()).rowwise().sum();
            Mat<T> dS = (P.array() * (dP.colwise() - r).array()).matrix();
            dS *= scale;
            dQ.middleCols(h * dh, dh).noalias() += dS * K.middleCols(h * dh, dh);
            dK.middleCols(h * dh, dh).noalias() += dS.transpose() * Q.middleCols(h * dh, dh);
        }
    }
}

template <class T>
void sincos_into(double pos, int dims, T* out) {
    const int half = dims / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / std::max(half, 1));
        out[2 * i] = static_cast<T>(std::sin(pos * freq));
        out[2 * i + 1] = static_cast<T>(std::cos(pos * freq));
    }
    if (dims % 2) out[dims - 1] = T(0);
}

std::string block_name(int b, const char* part) { return "blocks." + std::to_string(b) + "." + part; }

}  // namespace

template <class T>
Mat<T> patchify(const Volume<T>& x, const PatchSize& patch) {
    auto check = [](int size, int p, const char* axis, const char* pname) {
        if (p <= 0 || size % p != 0)
            throw ConfigError(std::string("patch.") + pname + "=" + std::to_string(p) + " does not divide the " + axis +
                              " axis (size " + std::to_string(size) + ")");
    };
    check(x.frames, patch.t, "frames", "t");
    check(x.height, patch.h, "height", "h");
    check(x.width, patch.w, "width", "w");
    const int nt = x.frames / patch.t, nh = x.height / patch.h, nw = x.width / patch.w, c = x.channels;
    Mat<T> tok(static_cast<Eigen::Index>(nt) * nh * nw, static_cast<Eigen::Index>(patch.volume()) * c);
    for (int ft = 0; ft < nt; ++ft)
        for (int hp = 0; hp < nh; ++hp)
            for (int wp = 0; wp < nw; ++wp) {
                T* row = tok.data() + ((static_cast<Eigen::Index>(ft) * nh + hp) * nw + wp) * tok.cols();
                for (int dt = 0; dt < patch.t; ++dt)
                    for (int dy = 0; dy < patch.h; ++dy)
                        for (int dx = 0; dx < patch.w; ++dx) {
                            const T* src = &x.at(ft * patch.t + dt, hp * patch.h + dy, wp * patch.w + dx, 0);
                            T* dst = row + ((dt * patch.h + dy) * patch.w + dx) * c;
                            std::copy(src, src + c, dst);
                        }
            }
    return tok;
}

template <class T>
Volume<T> unpatchify(const Mat<T>& tokens, const PatchSize& patch, int frames, int height, int width, int channels) {
    const int nt = frames / patch.t, nh = height / patch.h, nw = width / patch.w;
    if (tokens.rows() != static_cast<Eigen::Index>(nt) * nh * nw || tokens.cols() != patch.volume() * channels)
        throw ShapeError("token matrix does not match the requested volume");
    Volume<T> x(frames, height, width, channels);
    for (int ft = 0; ft < nt; ++ft)
        for (int hp = 0; hp < nh; ++hp)
            for (int wp = 0; wp < nw; ++wp) {
                const T* row = tokens.data() + ((static_cast<Eigen::Index>(ft) * nh + hp) * nw + wp) * tokens.cols();
                for (int dt = 0; dt < patch.t; ++dt)
                    for (int dy = 0; dy < patch.h; ++dy)
                        for (int dx = 0; dx < patch.w; ++dx) {
                            const T* src = row + ((dt * patch.h + dy) * patch.w + dx) * channels;
                            std::copy(src, src + channels, &x.at(ft * patch.t + dt, hp * patch.h + dy, wp * patch.w + dx, 0));
                        }
            }
    return x;
}

template <class T>
std::vector<std::pair<std::string, std::pair<int, int>>> Denoiser<T>::expected_shapes() const {
    const int d = cfg_.embed_dim;
    const int pin = cfg_.patch.volume() * cfg_.input_channels();
    const int pout = cfg_.patch.volume() * cfg_.latent_channels();
    std::vector<std::pair<std::string, std::pair<int, int>>> shapes;
    auto lin = [&](const std::string& name, int din, int dout) {
        shapes.push_back({name + ".weight", {dout, din}});
        shapes.push_back({name + ".bias", {1, dout}});
    };
    lin("embed", pin, d);
    lin("time.fc1", d, d);
    lin("time.fc2", d, d);
    lin("ctx.text", cfg_.d_text, d);
    lin("ctx.image", cfg_.d_text, d);
    for (const auto& l : lora_layers()) lin(l.name, l.d_in, l.d_out);
    lin("out", d, pout);
    return shapes;
}

template <class T>
std::vector<LayerShape> Denoiser<T>::lora_layers() const {
    const int d = cfg_.embed_dim, f = cfg_.ff_mult * cfg_.embed_dim;
    std::vector<LayerShape> layers;
    for (int b = 0; b < cfg_.num_layers; ++b) {
        for (const char* attn : {"spatial", "temporal", "cross"})
            for (const char* proj : {"q", "k", "v", "o"})
                layers.push_back({block_name(b, attn) + "." + proj, d, d});
        layers.push_back({block_name(b, "ff.fc1"), d, f});
        layers.push_back({block_name(b, "ff.fc2"), f, d});
    }
    return layers;
}

template <class T>
Denoiser<T>::Denoiser(DenoiserConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), codec_(cfg_.latent_pool) {
    cfg_.validate();
    init_encoders();
    Rng root = Rng(seed).split("denoiser_init");
    const double residual = 1.0 / std::sqrt(2.0 * std::max(cfg_.num_layers, 1));
    for (const auto& [name, shape] : expected_shapes()) {
        Mat<T> m = Mat<T>::Zero(shape.first, shape.second);
        if (name.ends_with(".weight")) {
            double std = 1.0 / std::sqrt(static_cast<double>(shape.second));
            if (name.ends_with(".o.weight") || name.ends_with("ff.fc2.weight")) std *= residual;
            if (name == "out.weight") std *= 0.1;
            Rng rng = root.split(name);
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.normal(0.0, std));
        }
        params_.emplace(name, std::move(m));
    }
}

template <class T>
Denoiser<T>::Denoiser(DenoiserConfig cfg, ParamMap<T> params)
    : cfg_(std::move(cfg)), params_(std::move(params)), codec_(cfg_.latent_pool) {
    cfg_.validate();
    init_encoders();
    check_params();
}

template <class T>
void Denoiser<T>::init_encoders() {
    schedule_ = std::make_shared<const NoiseSchedule>(
        NoiseSchedule::linear(cfg_.noise_steps, cfg_.beta_start, cfg_.beta_end));
    text_ = std::make_shared<const TextEncoder>(cfg_.d_text, cfg_.text_buckets, cfg_.max_text_tokens, cfg_.encoder_seed);
    image_ = std::make_shared<const RandomProjectionEncoder>(cfg_.d_text, cfg_.encoder_seed);
}

template <class T>
void Denoiser<T>::check_params() const {
    const auto shapes = expected_shapes();
    if (shapes.size() != params_.size())
        throw FormatError("checkpoint holds " + std::to_string(params_.size()) + " base tensors, expected " +
                          std::to_string(shapes.size()));
    for (const auto& [name, shape] : shapes) {
        const auto it = params_.find(name);
        if (it == params_.end()) throw FormatError("checkpoint is missing parameter '" + name + "'");
        if (it->second.rows() != shape.first || it->second.cols() != shape.second)
            throw FormatError("parameter '" + name + "' has wrong shape");
    }
}

template <class T>
std::size_t Denoiser<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : params_) n += static_cast<std::size_t>(m.size());
    return n;
}

template <class T>
const Mat<T>& Denoiser<T>::p(const std::string& name) const {
    const auto it = params_.find(name);
    if (it == params_.end()) throw FormatError("missing parameter '" + name + "'");
    return it->second;
}

template <class T>
Mat<T> Denoiser<T>::linear(const std::string& name, const Mat<T>& x, const Adapters& ad, LinearCache<T>* c) const {
    const Mat<T>& w = p(name + ".weight");
    const Mat<T>& b = p(name + ".bias");
    Mat<T> y(x.rows(), w.rows());
    y.noalias() = x * w.transpose();
    y.rowwise() += b.row(0);
    auto apply = [&](const LoraAdapterT<T>* adapter, Mat<T>* keep) {
        if (!adapter) return;
        const auto it = adapter->layers.find(name);
        if (it == adapter->layers.end()) return;
        Mat<T> xa(x.rows(), it->second.a.rows());
        xa.noalias() = x * it->second.a.transpose();
        y.noalias() += adapter->scale * (xa * it->second.b.transpose());
        if (keep) *keep = std::move(xa);
    };
    apply(ad.universal, c ? &c->xa_universal : nullptr);
    apply(ad.expert, c ? &c->xa_expert : nullptr);
    if (c) c->x = x;
    return y;
}

template <class T>
Mat<T> Denoiser<T>::linear_backward(const std::string& name, const Mat<T>& dy, const LinearCache<T>& c,
                                    const Adapters& ad, Gradients<T>& g, bool need_dx) const {
    const Mat<T>& w = p(name + ".weight");
    if (Mat<T>* gw = g.slot(name + ".weight", w.rows(), w.cols())) gw->noalias() += dy.transpose() * c.x;
    if (Mat<T>* gb = g.slot(name + ".bias", 1, w.rows())) *gb += dy.colwise().sum();
    Mat<T> dx;
    if (need_dx) dx.noalias() = dy * w;
    auto back = [&](const LoraAdapterT<T>* adapter, const std::string& prefix, const Mat<T>& xa) {
        if (!adapter) return;
        const auto it = adapter->layers.find(name);
        if (it == adapter->layers.end()) return;
        const auto& f = it->second;
        Mat<T> dyb(dy.rows(), f.b.cols());
        dyb.noalias() = dy * f.b;
        if (Mat<T>* gb = g.slot(prefix + name + "/B", f.b.rows(), f.b.cols()))
            gb->noalias() += adapter->scale * (dy.transpose() * xa);
        if (Mat<T>* ga = g.slot(prefix + name + "/A", f.a.rows(), f.a.cols()))
            ga->noalias() += adapter->scale * (dyb.transpose() * c.x);
        if (need_dx) dx.noalias() += adapter->scale * (dyb * f.a);
    };
    back(ad.universal, universal_prefix(), c.xa_universal);
    back(ad.expert, ad.expert_prefix, c.xa_expert);
    return dx;
}

template <class T>
Mat<T> Denoiser<T>::positional(int token_frames, int frames) const {
    const int nh = cfg_.latent_height() / cfg_.patch.h, nw = cfg_.latent_width() / cfg_.patch.w;
    const int d = cfg_.embed_dim, q = d / 4;
    Mat<T> pos = Mat<T>::Zero(static_cast<Eigen::Index>(token_frames) * nh * nw, d);
    for (int ft = 0; ft < token_frames; ++ft) {
        const double rel = token_frames > 1 ? static_cast<double>(ft) / (token_frames - 1) * (cfg_.max_frames - 1) : 0.0;
        for (int hp = 0; hp < nh; ++hp)
            for (int wp = 0; wp < nw; ++wp) {
                T* row = pos.data() + ((static_cast<Eigen::Index>(ft) * nh + hp) * nw + wp) * d;
                sincos_into<T>(hp, q, row);
                sincos_into<T>(wp, q, row + q);
                sincos_into<T>(ft * cfg_.patch.t, q, row + 2 * q);
                sincos_into<T>(rel, q, row + 3 * q);
            }
    }
    (void)frames;
    return pos;
}

template <class T>
Volume<T> Denoiser<T>::forward(const Volume<T>& noisy, int timestep, const TextEmbedding& text,
                               const GuidancePack& pack, const MoLStateT<T>* mol, int target_n,
                               ForwardCache<T>* cache) const {
    const int n = noisy.frames;
    if (target_n != n)
        throw ArgumentError("target_N=" + std::to_string(target_n) + " differs from the latent frame count " +
                            std::to_string(n));
    if (n < 2) throw ArgumentError("denoiser needs at least 2 frames");
    if (n > cfg_.max_frames) throw ArgumentError("frame count exceeds model.max_frames");
    if (timestep < 0 || timestep >= cfg_.noise_steps)
        throw RangeError("timestep " + std::to_string(timestep) + " outside [0, " + std::to_string(cfg_.noise_steps) + ")");
    if (noisy.height != cfg_.latent_height() || noisy.width != cfg_.latent_width() ||
        noisy.channels != cfg_.latent_channels())
        throw ShapeError("noisy latent does not match the model latent shape");
    if (text.dim() != cfg_.d_text) throw ShapeError("text embedding dim does not match model.d_text");
    if (static_cast<int>(pack.cond_embedding.size()) != cfg_.d_text)
        throw ShapeError("condition embedding dim does not match model.d_text");

    Adapters ad;
    if (mol) {
        ad.universal = &mol->universal;
        ad.expert = mol->expert_for(target_n);
        if (ad.expert) ad.expert_prefix = expert_prefix(route(target_n, mol->scales));
    }

    const int d = cfg_.embed_dim, heads = cfg_.num_heads;
    const Volume<T> input = assemble_model_input(noisy, pack);
    const Mat<T> tokens = patchify(input, cfg_.patch);
    const int token_frames = n / cfg_.patch.t;
    const int spatial = static_cast<int>(tokens.rows()) / token_frames;
    const Eigen::Index length = tokens.rows();

    if (cache) {
        *cache = ForwardCache<T>{};
        cache->frames = n;
        cache->token_frames = token_frames;
        cache->spatial_tokens = spatial;
        cache->universal = ad.universal;
        cache->expert = ad.expert;
        cache->expert_prefix = ad.expert_prefix;
        cache->blocks.resize(cfg_.num_layers);
    }
    const Adapters none;

    // timestep embedding
    Mat<T> tsin(1, d);
    sincos_into<T>(timestep, d, tsin.data());
    Mat<T> tpre = linear("time.fc1", tsin, none, cache ? &cache->time1 : nullptr);
    Mat<T> tact = tpre.unaryExpr([](T u) { return silu(u); });
    const Mat<T> temb = linear("time.fc2", tact, none, cache ? &cache->time2 : nullptr);
    if (cache) cache->time_pre = std::move(tpre);

    // context tokens: text words + pooled, then the summed image condition
    const int kt = static_cast<int>(text.tokens.size());
    Mat<T> tt(kt, cfg_.d_text);
    for (int i = 0; i < kt; ++i)
        for (int j = 0; j < cfg_.d_text; ++j) tt(i, j) = static_cast<T>(text.tokens[i][j]);
    Mat<T> ce(1, cfg_.d_text);
    for (int j = 0; j < cfg_.d_text; ++j) ce(0, j) = static_cast<T>(pack.cond_embedding[j]);
    Mat<T> ctx(kt + 1, d);
    ctx.topRows(kt) = linear("ctx.text", tt, none, cache ? &cache->ctx_text : nullptr);
    ctx.bottomRows(1) = linear("ctx.image", ce, none, cache ? &cache->ctx_image : nullptr);
    if (cache) {
        cache->text_tokens = kt;
        cache->ctx = ctx;
    }

    Mat<T> x = linear("embed", tokens, none, cache ? &cache->embed : nullptr);
    x += positional(token_frames, n);
    x.rowwise() += temb.row(0);

    const GroupLayout spatial_layout{token_frames, spatial, spatial, 1};
    const GroupLayout temporal_layout{spatial, token_frames, 1, spatial};
    const GroupLayout query_all{1, length, 0, 1};
    const GroupLayout ctx_all{1, kt + 1, 0, 1};

    for (int b = 0; b < cfg_.num_layers; ++b) {
        BlockCache<T>* bc = cache ? &cache->blocks[b] : nullptr;
        auto self_attention = [&](const char* kind, const GroupLayout& layout, NormCache<T>* nc, LinearCache<T>* cq,
                                  LinearCache<T>* ck, LinearCache<T>* cv, LinearCache<T>* co, AttnCache<T>* ac) {
            const std::string base = block_name(b, kind);
            const Mat<T> h = layer_norm(x, nc);
            Mat<T> q = linear(base + ".q", h, ad, cq);
            Mat<T> k = linear(base + ".k", h, ad, ck);
            Mat<T> v = linear(base + ".v", h, ad, cv);
            const Mat<T> o = grouped_attention(q, k, v, layout, layout, heads, ac ? &ac->probs : nullptr);
            x += linear(base + ".o", o, ad, co);
            if (ac) {
                ac->q = std::move(q);
                ac->k = std::move(k);
                ac->v = std::move(v);
            }
        };
        self_attention("spatial", spatial_layout, bc ? &bc->n_spatial : nullptr, bc ? &bc->sq : nullptr,
                       bc ? &bc->sk : nullptr, bc ? &bc->sv : nullptr, bc ? &bc->so : nullptr,
                       bc ? &bc->spatial : nullptr);
        self_attention("temporal", temporal_layout, bc ? &bc->n_temporal : nullptr, bc ? &bc->tq : nullptr,
                       bc ? &bc->tk : nullptr, bc ? &bc->tv : nullptr, bc ? &bc->to : nullptr,
                       bc ? &bc->temporal : nullptr);
        {
            const std::string base = block_name(b, "cross");
            const Mat<T> h = layer_norm(x, bc ? &bc->n_cross : nullptr);
            Mat<T> q = linear(base + ".q", h, ad, bc ? &bc->cq : nullptr);
            Mat<T> k = linear(base + ".k", ctx, ad, bc ? &bc->ck : nullptr);
            Mat<T> v = linear(base + ".v", ctx, ad, bc ? &bc->cv : nullptr);
            const Mat<T> o = grouped_attention(q, k, v, query_all, ctx_all, heads, bc ? &bc->cross.probs : nullptr);
            x += linear(base + ".o", o, ad, bc ? &bc->co : nullptr);
            if (bc) {
                bc->cross.q = std::move(q);
                bc->cross.k = std::move(k);
                bc->cross.v = std::move(v);
            }
        }
        {
            const Mat<T> h = layer_norm(x, bc ? &bc->n_ff : nullptr);
            Mat<T> pre = linear(block_name(b, "ff.fc1"), h, ad, bc ? &bc->ff1 : nullptr);
            const Mat<T> act = pre.unaryExpr([](T u) { return gelu(u); });
            x += linear(block_name(b, "ff.fc2"), act, ad, bc ? &bc->ff2 : nullptr);
            if (bc) bc->ff_pre = std::move(pre);
        }
    }

    const Mat<T> h = layer_norm(x, cache ? &cache->final_norm : nullptr);
    const Mat<T> y = linear("out", h, none, cache ? &cache->out : nullptr);
    return unpatchify(y, cfg_.patch, n, noisy.height, noisy.width, noisy.channels);
}

template <class T>
void Denoiser<T>::backward(const Volume<T>& grad_out, const ForwardCache<T>& cache, Gradients<T>& grads) const {
    const int heads = cfg_.num_heads;
    const Adapters ad{cache.universal, cache.expert, cache.expert_prefix};
    const Adapters none;
    const Eigen::Index length = static_cast<Eigen::Index>(cache.token_frames) * cache.spatial_tokens;
    const int kt = cache.text_tokens;

    const GroupLayout spatial_layout{cache.token_frames, cache.spatial_tokens, cache.spatial_tokens, 1};
    const GroupLayout temporal_layout{cache.spatial_tokens, cache.token_frames, 1, cache.spatial_tokens};
    const GroupLayout query_all{1, length, 0, 1};
    const GroupLayout ctx_all{1, kt + 1, 0, 1};

    const Mat<T> dy = patchify(grad_out, cfg_.patch);
    Mat<T> dx = layer_norm_backward(linear_backward("out", dy, cache.out, none, grads, true), cache.final_norm);
    Mat<T> dctx = Mat<T>::Zero(kt + 1, cfg_.embed_dim);

    for (int b = cfg_.num_layers - 1; b >= 0; --b) {
        const BlockCache<T>& bc = cache.blocks[b];
        {
            const Mat<T> dact = linear_backward(block_name(b, "ff.fc2"), dx, bc.ff2, ad, grads, true);
            const Mat<T> dpre = (dact.array() * bc.ff_pre.unaryExpr([](T u) { return gelu_grad(u); }).array()).matrix();
            dx += layer_norm_backward(linear_backward(block_name(b, "ff.fc1"), dpre, bc.ff1, ad, grads, true), bc.n_ff);
        }
        {
            const std::string base = block_name(b, "cross");
            const Mat<T> dout = linear_backward(base + ".o", dx, bc.co, ad, grads, true);
            Mat<T> dq, dk, dv;
            grouped_attention_backward(dout, bc.cross, query_all, ctx_all, heads, dq, dk, dv);
            dctx += linear_backward(base + ".k", dk, bc.ck, ad, grads, true);
            dctx += linear_backward(base + ".v", dv, bc.cv, ad, grads, true);
            dx += layer_norm_backward(linear_backward(base + ".q", dq, bc.cq, ad, grads, true), bc.n_cross);
        }
        auto self_back = [&](const char* kind, const GroupLayout& layout, const NormCache<T>& nc, const LinearCache<T>& cq,
                             const LinearCache<T>& ck, const LinearCache<T>& cv, const LinearCache<T>& co,
                             const AttnCache<T>& ac) {
            const std::string base = block_name(b, kind);
            const Mat<T> dout = linear_backward(base + ".o", dx, co, ad, grads, true);
            Mat<T> dq, dk, dv;
            grouped_attention_backward(dout, ac, layout, layout, heads, dq, dk, dv);
            Mat<T> dh = linear_backward(base + ".q", dq, cq, ad, grads, true);
            dh += linear_backward(base + ".k", dk, ck, ad, grads, true);
            dh += linear_backward(base + ".v", dv, cv, ad, grads, true);
            dx += layer_norm_backward(dh, nc);
        };
        self_back("temporal", temporal_layout, bc.n_temporal, bc.tq, bc.tk, bc.tv, bc.to, bc.temporal);
        self_back("spatial", spatial_layout, bc.n_spatial, bc.sq, bc.sk, bc.sv, bc.so, bc.spatial);
    }

    // embed, timestep MLP and context projections only feed parameter gradients
    linear_backward("embed", dx, cache.embed, none, grads, false);
    const Mat<T> dtemb = dx.colwise().sum();
    const Mat<T> dact = linear_backward("time.fc2", dtemb, cache.time2, none, grads, true);
    const Mat<T> dpre = (dact.array() * cache.time_pre.unaryExpr([](T u) { return silu_grad(u); }).array()).matrix();
    linear_backward("time.fc1", dpre, cache.time1, none, grads, false);
    linear_backward("ctx.text", Mat<T>(dctx.topRows(kt)), cache.ctx_text, none, grads, false);
    linear_backward("ctx.image", Mat<T>(dctx.bottomRows(1)), cache.ctx_image, none, grads, false);
}

template <class T>
Denoiser<T> Denoiser<T>::merged(const MoLStateT<T>& mol, int n) const {
    Denoiser out = *this;
    for (auto& [layer, delta] : effective_delta(mol, n)) {
        auto it = out.params_.find(layer + ".weight");
        if (it == out.params_.end()) throw ConfigError("adapter layer '" + layer + "' is not a denoiser layer");
        if (it->second.rows() != delta.rows() || it->second.cols() != delta.cols())
            throw ShapeError("adapter delta shape differs from '" + layer + "'");
        it->second += delta;
    }
    return out;
}

template <class T>
template <class U>
Denoiser<U> Denoiser<T>::cast() const {
    ParamMap<U> params;
    for (const auto& [name, m] : params_) params.emplace(name, m.template cast<U>());
    return Denoiser<U>(cfg_, std::move(params));
}

template class Denoiser<float>;
template class Denoiser<double>;
template Denoiser<double> Denoiser<float>::cast<double>() const;
template Denoiser<float> Denoiser<double>::cast<float>() const;

template Mat<float> patchify<float>(const Volume<float>&, const PatchSize&);
template Mat<double> patchify<double>(const Volume<double>&, const PatchSize&);
template Volume<float> unpatchify<float>(const Mat<float>&, const PatchSize&, int, int, int, int);
template Volume<double> unpatchify<double>(const Mat<double>&, const PatchSize&, int, int, int, int);

}  // namespace semfi
