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

#include "semfi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semfi/errors.hpp"
#include "semfi/pipeline.hpp"

namespace semfi {

void MetricResult::finalize() {
    if (per_clip_values.empty()) throw StatisticsError("metric '" + name + "' has no values");
    value = std::accumulate(per_clip_values.begin(), per_clip_values.end(), 0.0) /
            static_cast<double>(per_clip_values.size());
    if (!std::isfinite(value)) throw StatisticsError("metric '" + name + "' is not finite");
}

namespace {

double psnr_from(const std::vector<float>& a, const std::vector<float>& b) {
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("psnr inputs differ in shape");
    return psnr_from(a.data, b.data);
}

double psnr(const Volume<float>& a, const Volume<float>& b) {
    if (!a.same_shape(b)) throw ShapeError("psnr inputs differ in shape");
    return psnr_from(a.data, b.data);
}

double ssim(const Image& a0, const Image& b0) {
    if (!a0.same_shape(b0)) throw ShapeError("ssim inputs differ in shape");
    constexpr int kWin = 7;
    if (a0.height < kWin || a0.width < kWin)
        throw ArgumentError("ssim needs frames of at least 7x7, got " + std::to_string(a0.height) + "x" +
                            std::to_string(a0.width));
    const Image a = to_gray(a0), b = to_gray(b0);
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    constexpr double np = kWin * kWin;
    constexpr double cov_norm = np / (np - 1.0);
    double acc = 0.0;
    int count = 0;
    for (int y = 0; y + kWin <= a.height; ++y)
        for (int x = 0; x + kWin <= a.width; ++x) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int dy = 0; dy < kWin; ++dy)
                for (int dx = 0; dx < kWin; ++dx) {
                    const double va = a.at(y + dy, x + dx, 0), vb = b.at(y + dy, x + dx, 0);
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            const double ma = sa / np, mb = sb / np;
            const double va = cov_norm * (saa / np - ma * ma);
            const double vb = cov_norm * (sbb / np - mb * mb);
            const double vab = cov_norm * (sab / np - ma * mb);
            acc += ((2 * ma * mb + c1) * (2 * vab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return acc / count;
}

double perceptual_distance(const Image& a, const Image& b, const PerceptualEmbedder& embedder) {
    if (!a.same_shape(b)) throw ShapeError("perceptual distance inputs differ in shape");
    if (a == b) return 0.0;
    const auto fa = embedder.feature_maps(a), fb = embedder.feature_maps(b);
    double total = 0.0;
    for (std::size_t s = 0; s < fa.size(); ++s) {
        const Image& ma = fa[s];
        const Image& mb = fb[s];
        double acc = 0.0;
        for (int y = 0; y < ma.height; ++y)
            for (int x = 0; x < ma.width; ++x) {
                double na = 0.0, nb = 0.0;
                for (int c = 0; c < ma.channels; ++c) {
                    na += static_cast<double>(ma.at(y, x, c)) * ma.at(y, x, c);
                    nb += static_cast<double>(mb.at(y, x, c)) * mb.at(y, x, c);
                }
                na = std::sqrt(na) + 1e-10;
                nb = std::sqrt(nb) + 1e-10;
                for (int c = 0; c < ma.channels; ++c) {
                    const double d = ma.at(y, x, c) / na - mb.at(y, x, c) / nb;
                    acc += d * d;
                }
            }
        total += acc / (static_cast<double>(ma.height) * ma.width);
    }
    return total;
}

double perceptual_distance(const VideoClip& a, const VideoClip& b, const PerceptualEmbedder& embedder) {
    if (a.num_frames() != b.num_frames())
        throw PairingError("cannot pair " + std::to_string(a.num_frames()) + " frames with " +
                           std::to_string(b.num_frames()));
    double acc = 0.0;
    for (int i = 0; i < a.num_frames(); ++i) acc += perceptual_distance(a.frame(i), b.frame(i), embedder);
    return acc / a.num_frames();
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double trace_sqrt(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

double frechet_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (x.rows() < 2 || y.rows() < 2) throw StatisticsError("Fréchet distance needs at least 2 samples per set");
    if (x.cols() != y.cols()) throw ShapeError("Fréchet feature dimensions differ");
    const Eigen::RowVectorXd mx = x.colwise().mean(), my = y.colwise().mean();
    const Eigen::MatrixXd cx = x.rowwise() - mx, cy = y.rowwise() - my;
    const Eigen::MatrixXd sx = cx.transpose() * cx / static_cast<double>(x.rows() - 1);
    const Eigen::MatrixXd sy = cy.transpose() * cy / static_cast<double>(y.rows() - 1);
    const Eigen::MatrixXd r = psd_sqrt(sx);
    const double cross = trace_sqrt(r * sy * r);
    const double d = (mx - my).squaredNorm() + sx.trace() + sy.trace() - 2.0 * cross;
    return std::max(d, 0.0);
}

std::vector<Image> frames_of(const VideoClip& clip) {
    std::vector<Image> out;
    for (int i = 0; i < clip.num_frames(); ++i) out.push_back(clip.frame(i));
    return out;
}

double frechet_feature_distance(const std::vector<Image>& generated, const std::vector<Image>& ground_truth,
                                const FrameEmbedder& embedder) {
    if (generated.size() < 2 || ground_truth.size() < 2)
        throw StatisticsError("Fréchet distance needs at least 2 frames per set");
    const auto fill = [&](const std::vector<Image>& frames) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(frames.size()), embedder.dim());
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const auto e = embedder.embed(frames[i]);
            for (int k = 0; k < embedder.dim(); ++k) m(static_cast<Eigen::Index>(i), k) = e[static_cast<std::size_t>(k)];
        }
        return m;
    };
    const Eigen::MatrixXd x = fill(generated), y = fill(ground_truth);
    if (x == y) return 0.0;
    return frechet_distance(x, y);
}

double mean_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("frames differ in shape");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
    return acc / static_cast<double>(a.data.size());
}

double temporal_flickering(const VideoClip& clip) {
    if (clip.num_frames() < 2) throw ArgumentError("temporal flickering needs at least 2 frames");
    double acc = 0.0;
    for (int i = 0; i + 1 < clip.num_frames(); ++i) acc += mean_abs_diff(clip.frame(i), clip.frame(i + 1));
    return 1.0 - acc / (clip.num_frames() - 1);
}

Image AverageInterpolator::interpolate(const Image& prev, const Image& next) const {
    if (!prev.same_shape(next)) throw ShapeError("interpolation frames differ in shape");
    Image out(prev.height, prev.width, prev.channels);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = 0.5f * (prev.data[i] + next.data[i]);
    return out;
}

Image FlowWarpInterpolator::interpolate(const Image& prev, const Image& next) const {
    const FlowField f = est_.estimate(prev, next);
    FlowField fwd = f, bwd = f;
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        fwd.u[i] = -0.5f * f.u[i];
        fwd.v[i] = -0.5f * f.v[i];
        bwd.u[i] = 0.5f * f.u[i];
        bwd.v[i] = 0.5f * f.v[i];
    }
    const Image a = warp(prev, fwd), b = warp(next, bwd);
    return AverageInterpolator().interpolate(a, b);
}

double motion_smoothness(const VideoClip& clip, const FrameInterpolator& interp) {
    if (clip.num_frames() < 3) throw ArgumentError("motion smoothness needs at least 3 frames");
    double acc = 0.0;
    int count = 0;
    for (int i = 1; i + 1 < clip.num_frames(); i += 2) {
        acc += mean_abs_diff(clip.frame(i), interp.interpolate(clip.frame(i - 1), clip.frame(i + 1)));
        ++count;
    }
    return 1.0 - acc / count;
}

double dynamic_degree(const VideoClip& clip, const FlowEstimator& est) {
    if (clip.num_frames() < 2) throw ArgumentError("dynamic degree needs at least 2 frames");
    double acc = 0.0;
    for (int i = 0; i + 1 < clip.num_frames(); ++i) acc += flow_score(clip, i, i + 1, est);
    return acc / (clip.num_frames() - 1);
}

FrameFidelity frame_fidelity(const VideoClip& generated, const Image& first, const Image& last,
                             const PerceptualEmbedder& embedder) {
    const Image g0 = generated.frame(0), g1 = generated.frame(generated.num_frames() - 1);
    if (!g0.same_shape(first) || !g1.same_shape(last)) throw ShapeError("frame fidelity inputs differ in shape");
    FrameFidelity f;
    f.psnr_first = psnr(g0, first);
    f.psnr_last = psnr(g1, last);
    f.ssim_first = ssim(g0, first);
    f.ssim_last = ssim(g1, last);
    f.perceptual_first = perceptual_distance(g0, first, embedder);
    f.perceptual_last = perceptual_distance(g1, last, embedder);
    return f;
}

double semantic_fidelity(const VideoClip& clip, const std::string& text, const JointEmbedder& embedder) {
    const auto v = embedder.embed_video(clip);
    const auto t = embedder.embed_text(text);
    return cosine_similarity(v, t);
}

double aesthetic_quality(const VideoClip&) {
    throw NotConfiguredError("aesthetic quality: predictor not configured");
}

double imaging_quality(const VideoClip&) { throw NotConfiguredError("imaging quality: predictor not configured"); }

}  // namespace semfi
