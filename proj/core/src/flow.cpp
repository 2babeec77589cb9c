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

#include "semfi/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semfi/errors.hpp"

namespace semfi {

double FlowField::mean_magnitude() const {
    if (u.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        acc += std::sqrt(static_cast<double>(u[i]) * u[i] + static_cast<double>(v[i]) * v[i]);
    return acc / static_cast<double>(u.size());
}

float sample_bilinear(const Image& img, int c, float y, float x) {
    y = std::clamp(y, 0.0f, static_cast<float>(img.height - 1));
    x = std::clamp(x, 0.0f, static_cast<float>(img.width - 1));
    const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
    const float fy = y - static_cast<float>(y0), fx = x - static_cast<float>(x0);
    const float top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
    const float bot = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
    return top * (1 - fy) + bot * fy;
}

Image warp(const Image& b, const FlowField& flow) {
    Image out(b.height, b.width, b.channels);
    for (int y = 0; y < b.height; ++y)
        for (int x = 0; x < b.width; ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * b.width + x;
            for (int c = 0; c < b.channels; ++c)
                out.at(y, x, c) = sample_bilinear(b, c, static_cast<float>(y) + flow.v[k], static_cast<float>(x) + flow.u[k]);
        }
    return out;
}

namespace {

void check_pair(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("flow frames differ in shape");
}

FlowField upsample(const FlowField& f, int h, int w) {
    FlowField out(h, w);
    const float sy = static_cast<float>(h) / static_cast<float>(f.height);
    const float sx = static_cast<float>(w) / static_cast<float>(f.width);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int yy = std::min(f.height - 1, static_cast<int>(static_cast<float>(y) / sy));
            const int xx = std::min(f.width - 1, static_cast<int>(static_cast<float>(x) / sx));
            const std::size_t k = static_cast<std::size_t>(yy) * f.width + xx;
            out.u[static_cast<std::size_t>(y) * w + x] = f.u[k] * sx;
            out.v[static_cast<std::size_t>(y) * w + x] = f.v[k] * sy;
        }
    return out;
}

}  // namespace

FlowField PyramidLucasKanade::estimate(const Image& a0, const Image& b0) const {
    check_pair(a0, b0);
    std::vector<Image> pa{to_gray(a0)}, pb{to_gray(b0)};
    while (static_cast<int>(pa.size()) < levels_ && pa.back().height >= 16 && pa.back().width >= 16) {
        pa.push_back(area_resize(pa.back(), pa.back().height / 2, pa.back().width / 2));
        pb.push_back(area_resize(pb.back(), pb.back().height / 2, pb.back().width / 2));
    }
    FlowField flow(pa.back().height, pa.back().width);
    for (int level = static_cast<int>(pa.size()) - 1; level >= 0; --level) {
        const Image& a = pa[static_cast<std::size_t>(level)];
        const Image& b = pb[static_cast<std::size_t>(level)];
        if (flow.height != a.height || flow.width != a.width) flow = upsample(flow, a.height, a.width);
        const int H = a.height, W = a.width;
        std::vector<float> ix(static_cast<std::size_t>(H) * W), iy(ix.size()), it(ix.size());
        for (int iter = 0; iter < iterations_; ++iter) {
            const Image bw = warp(b, flow);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const int xm = std::max(x - 1, 0), xp = std::min(x + 1, W - 1);
                    const int ym = std::max(y - 1, 0), yp = std::min(y + 1, H - 1);
                    const std::size_t k = static_cast<std::size_t>(y) * W + x;
                    const float gx = (a.at(y, xp, 0) - a.at(y, xm, 0) + bw.at(y, xp, 0) - bw.at(y, xm, 0)) /
                                     (2.0f * static_cast<float>(std::max(xp - xm, 1)));
                    const float gy = (a.at(yp, x, 0) - a.at(ym, x, 0) + bw.at(yp, x, 0) - bw.at(ym, x, 0)) /
                                     (2.0f * static_cast<float>(std::max(yp - ym, 1)));
                    ix[k] = gx;
                    iy[k] = gy;
                    it[k] = bw.at(y, x, 0) - a.at(y, x, 0);
                }
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    double sxx = lambda_, syy = lambda_, sxy = 0.0, sxt = 0.0, syt = 0.0;
                    for (int dy = -radius_; dy <= radius_; ++dy) {
                        const int yy = y + dy;
                        if (yy < 0 || yy >= H) continue;
                        for (int dx = -radius_; dx <= radius_; ++dx) {
                            const int xx = x + dx;
                            if (xx < 0 || xx >= W) continue;
                            const std::size_t k = static_cast<std::size_t>(yy) * W + xx;
                            sxx += ix[k] * ix[k];
                            syy += iy[k] * iy[k];
                            sxy += ix[k] * iy[k];
                            sxt += ix[k] * it[k];
                            syt += iy[k] * it[k];
                        }
                    }
                    const double det = sxx * syy - sxy * sxy;
                    const std::size_t k = static_cast<std::size_t>(y) * W + x;
                    flow.u[k] += static_cast<float>((-syy * sxt + sxy * syt) / det);
                    flow.v[k] += static_cast<float>((sxy * sxt - sxx * syt) / det);
                }
        }
    }
    return flow;
}

FlowField GlobalShiftFlow::estimate(const Image& a, const Image& b) const {
    check_pair(a, b);
    double best = std::numeric_limits<double>::infinity();
    int bu = 0, bv = 0;
    const int H = a.height, W = a.width;
    for (int dv = -max_shift_; dv <= max_shift_; ++dv)
        for (int du = -max_shift_; du <= max_shift_; ++du) {
            double err = 0.0;
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const int ys = ((y + dv) % H + H) % H, xs = ((x + du) % W + W) % W;
                    for (int c = 0; c < a.channels; ++c) err += std::abs(b.at(ys, xs, c) - a.at(y, x, c));
                }
            const double rank = err + 1e-9 * (std::abs(du) + std::abs(dv));
            if (rank < best) {
                best = rank;
                bu = du;
                bv = dv;
            }
        }
    FlowField f(H, W);
    std::fill(f.u.begin(), f.u.end(), static_cast<float>(bu));
    std::fill(f.v.begin(), f.v.end(), static_cast<float>(bv));
    return f;
}

FlowField SceneFlow::estimate(const Image&, const Image&) const {
    throw ArgumentError("ground-truth flow needs clip frame indices");
}

FlowField SceneFlow::estimate_frames(const VideoClip& clip, int i, int j) const {
    FlowField f(clip.height(), clip.width());
    scene_.displacement(scene_.frame_offset + i, scene_.frame_offset + j, clip.height(), clip.width(), f.u, f.v);
    return f;
}

std::unique_ptr<FlowEstimator> make_flow_estimator(const std::string& name) {
    if (name == "pyramid_lk") return std::make_unique<PyramidLucasKanade>();
    if (name == "global_shift") return std::make_unique<GlobalShiftFlow>();
    throw ConfigError("unknown flow estimator '" + name + "'");
}

double flow_score(const Image& first, const Image& last, const FlowEstimator& est) {
    check_pair(first, last);
    return est.estimate(first, last).mean_magnitude();
}

double flow_score(const VideoClip& clip, int i, int j, const FlowEstimator& est) {
    return est.estimate_frames(clip, i, j).mean_magnitude();
}

}  // namespace semfi
