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

#include "semfi/embedders.hpp"

#include <algorithm>
#include <cmath>

#include "semfi/errors.hpp"
#include "semfi/pipeline.hpp"
#include "semfi/rng.hpp"
#include "semfi/synth.hpp"
#include "semfi/text_encoder.hpp"

namespace semfi {

RandomConvEmbedder::RandomConvEmbedder(std::uint64_t seed, int channels, int scales)
    : seed_(seed), channels_(channels), scales_(scales) {
    if (channels < 1 || scales < 1) throw ConfigError("embedder needs at least one channel and one scale");
}

std::vector<float> RandomConvEmbedder::weights(int in_channels, int scale) const {
    Rng rng = Rng(seed_).split("conv").split(static_cast<std::uint64_t>(in_channels * 64 + scale));
    std::vector<float> w(static_cast<std::size_t>(channels_) * in_channels * 9 + channels_);
    const double sd = 1.0 / std::sqrt(9.0 * in_channels);
    for (std::size_t i = 0; i + channels_ < w.size(); ++i) w[i] = static_cast<float>(sd * rng.normal());
    for (int o = 0; o < channels_; ++o) w[w.size() - channels_ + o] = static_cast<float>(0.05 * rng.normal());
    return w;
}

std::vector<Image> RandomConvEmbedder::feature_maps(const Image& img) const {
    std::vector<Image> out;
    Image level = img;
    for (auto& v : level.data) v -= 0.5f;
    for (int s = 0; s < scales_; ++s) {
        if (s > 0) {
            if (level.height < 2 || level.width < 2) break;
            level = area_resize(level, level.height / 2, level.width / 2);
        }
        const int C = level.channels, H = level.height, W = level.width;
        const auto w = weights(C, s);
        const float* bias = w.data() + static_cast<std::size_t>(channels_) * C * 9;
        Image f(H, W, channels_);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int o = 0; o < channels_; ++o) {
                    float acc = bias[o];
                    for (int c = 0; c < C; ++c)
                        for (int ky = -1; ky <= 1; ++ky) {
                            const int yy = std::clamp(y + ky, 0, H - 1);
                            for (int kx = -1; kx <= 1; ++kx) {
                                const int xx = std::clamp(x + kx, 0, W - 1);
                                acc += w[((static_cast<std::size_t>(o) * C + c) * 3 + (ky + 1)) * 3 + (kx + 1)] *
                                       level.at(yy, xx, c);
                            }
                        }
                    f.at(y, x, o) = std::max(acc, 0.0f);
                }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<float> RandomConvEmbedder::embed(const Image& img) const {
    std::vector<float> d(static_cast<std::size_t>(dim()), 0.0f);
    const auto maps = feature_maps(img);
    for (std::size_t s = 0; s < maps.size(); ++s) {
        const Image& m = maps[s];
        const double n = static_cast<double>(m.height) * m.width;
        for (int c = 0; c < channels_; ++c) {
            double acc = 0.0;
            for (int y = 0; y < m.height; ++y)
                for (int x = 0; x < m.width; ++x) acc += m.at(y, x, c);
            d[s * channels_ + c] = static_cast<float>(acc / n);
        }
    }
    return d;
}

namespace {

struct ColorStats {
    double coverage = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double ratio = 0.0;
};

/// Pixels within a color distance of the palette entry.
ColorStats color_stats(const VideoClip& clip, int frame, const std::array<float, 3>& rgb) {
    const int H = clip.height(), W = clip.width(), C = clip.channels();
    const float lum = 0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2];
    ColorStats s;
    int count = 0, x0 = W, x1 = -1, y0 = H, y1 = -1;
    double sx = 0.0, sy = 0.0;
    const auto f = clip.frames.frame(frame);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const float* p = f.data() + (static_cast<std::size_t>(y) * W + x) * C;
            float d2 = 0.0f;
            if (C >= 3) {
                for (int c = 0; c < 3; ++c) d2 += (p[c] - rgb[c]) * (p[c] - rgb[c]);
            } else {
                d2 = 3.0f * (p[0] - lum) * (p[0] - lum);
            }
            if (d2 > 0.06f) continue;
            ++count;
            sx += x + 0.5;
            sy += y + 0.5;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    s.coverage = static_cast<double>(count) / (static_cast<double>(H) * W);
    if (count > 0) {
        s.cx = sx / count / W;
        s.cy = sy / count / H;
        s.ratio = static_cast<double>(count) / ((x1 - x0 + 1.0) * (y1 - y0 + 1.0));
    }
    return s;
}

double rbf(double v, double c, double w) { return std::exp(-((v - c) / w) * ((v - c) / w)); }

}  // namespace

std::vector<float> toy_video_features(const VideoClip& clip) {
    const int n = clip.num_frames();
    std::vector<float> out;
    for (const auto& pc : palette()) {
        std::vector<ColorStats> st;
        for (int i = 0; i < n; ++i) st.push_back(color_stats(clip, i, pc.rgb));
        double cov = 0.0, ratio = 0.0;
        int present = 0;
        for (const auto& s : st) {
            cov += s.coverage;
            if (s.coverage > 0.004) {
                ratio += s.ratio;
                ++present;
            }
        }
        cov /= n;
        ratio = present > 0 ? ratio / present : 0.0;
        const double on = present > 0 ? 1.0 : 0.0;
        // centroid motion between the first and last present frames
        int fi = -1, li = -1;
        for (int i = 0; i < n; ++i)
            if (st[i].coverage > 0.004) {
                if (fi < 0) fi = i;
                li = i;
            }
        double dx = 0.0, dy = 0.0, turn = 0.0;
        if (fi >= 0 && li > fi) {
            dx = st[li].cx - st[fi].cx;
            dy = st[li].cy - st[fi].cy;
            double mx = 0.0, my = 0.0;
            int m = 0;
            for (int i = fi; i <= li; ++i)
                if (st[i].coverage > 0.004) {
                    mx += st[i].cx;
                    my += st[i].cy;
                    ++m;
                }
            mx /= m;
            my /= m;
            int prev = -1;
            for (int i = fi; i <= li; ++i) {
                if (st[i].coverage <= 0.004) continue;
                if (prev >= 0) {
                    const double ax = st[prev].cx - mx, ay = st[prev].cy - my;
                    const double bx = st[i].cx - mx, by = st[i].cy - my;
                    turn += ax * by - ay * bx;
                }
                prev = i;
            }
        }
        const double early = st.front().coverage, late = st.back().coverage;
        const double trend = (late - early) * 20.0;
        const float feats[] = {static_cast<float>(on),
                               static_cast<float>(cov * 10.0),
                               static_cast<float>(on * rbf(ratio, 0.80, 0.08)),
                               static_cast<float>(on * rbf(ratio, 1.00, 0.06)),
                               static_cast<float>(on * rbf(ratio, 0.52, 0.10)),
                               static_cast<float>(std::max(dx, 0.0) * 4.0),
                               static_cast<float>(std::max(-dx, 0.0) * 4.0),
                               static_cast<float>(std::max(dy, 0.0) * 4.0),
                               static_cast<float>(std::max(-dy, 0.0) * 4.0),
                               static_cast<float>(std::max(turn, 0.0) * 20.0),
                               static_cast<float>(std::max(-turn, 0.0) * 20.0),
                               static_cast<float>(std::max(trend, 0.0)),
                               static_cast<float>(std::max(-trend, 0.0))};
        out.insert(out.end(), std::begin(feats), std::end(feats));
    }
    return out;
}

std::vector<float> bag_of_words(const std::string& text, int buckets) {
    std::vector<float> v(static_cast<std::size_t>(buckets), 0.0f);
    for (const auto& w : tokenize_words(text)) {
        if (w == "a" || w == "the" || w == "and" || w == "on") continue;
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : w) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        v[h % static_cast<std::uint64_t>(buckets)] += 1.0f;
    }
    double n = 0.0;
    for (float x : v) n += static_cast<double>(x) * x;
    if (n > 0.0)
        for (auto& x : v) x = static_cast<float>(x / std::sqrt(n));
    return v;
}

ToyProbeEmbedder ToyProbeEmbedder::fit(const DataConfig& data, std::uint64_t seed, int clips, int buckets,
                                       double ridge) {
    if (clips < 2) throw ConfigError("the semantic probe needs at least 2 training clips");
    DataConfig cfg = data;
    const Rng root = Rng(seed).split("probe");
    std::vector<std::vector<float>> feats, texts;
    for (int i = 0; i < clips; ++i) {
        Rng rng = root.split(static_cast<std::uint64_t>(i));
        const int frames = static_cast<int>(rng.uniform_int(8, 40));
        const SynthVideo v = synth_video(cfg, rng.split("video"), "probe", frames, 24);
        feats.push_back(toy_video_features(v.clip));
        texts.push_back(bag_of_words(v.clip.caption, buckets));
    }
    const auto d = static_cast<Eigen::Index>(feats.front().size()) + 1;
    Eigen::MatrixXd X(clips, d), Y(clips, buckets);
    for (int i = 0; i < clips; ++i) {
        for (Eigen::Index k = 0; k + 1 < d; ++k) X(i, k) = feats[i][k];
        X(i, d - 1) = 1.0;
        for (int b = 0; b < buckets; ++b) Y(i, b) = texts[i][b];
    }
    const Eigen::MatrixXd A = X.transpose() * X + ridge * Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd W = A.ldlt().solve(X.transpose() * Y);
    return ToyProbeEmbedder(std::move(W), buckets);
}

std::vector<float> ToyProbeEmbedder::embed_video(const VideoClip& clip) const {
    const auto f = toy_video_features(clip);
    if (static_cast<Eigen::Index>(f.size()) + 1 != w_.rows()) throw ShapeError("probe feature size mismatch");
    Eigen::RowVectorXd x(w_.rows());
    for (std::size_t k = 0; k < f.size(); ++k) x(static_cast<Eigen::Index>(k)) = f[k];
    x(w_.rows() - 1) = 1.0;
    const Eigen::RowVectorXd y = x * w_;
    std::vector<float> out(static_cast<std::size_t>(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(y(i));
    return out;
}

std::vector<float> ToyProbeEmbedder::embed_text(const std::string& text) const { return bag_of_words(text, buckets_); }

}  // namespace semfi
