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

#include "semfi/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "semfi/clip_io.hpp"
#include "semfi/errors.hpp"
#include "semfi/pipeline.hpp"
#include "semfi/rng.hpp"
#include "semfi/sampler.hpp"

namespace semfi {

namespace {

constexpr const char* kBanner =
    "proxy-metric: perceptual, Fréchet and semantic scores use fixed random or toy embedders; "
    "values are not comparable to published numbers";

std::string fmt(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, std::abs(v) >= 1000.0 ? "%.2f" : "%.4f", v);
    return buf;
}

std::string fmt_exact(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const MetricSpec& spec(const std::string& key) {
    for (const auto& m : bench_metrics())
        if (m.key == key) return m;
    throw ArgumentError("unknown metric '" + key + "'");
}

}  // namespace

const std::vector<MetricSpec>& bench_metrics() {
    static const std::vector<MetricSpec> m{
        {"video_lpips", "LPIPS*", Direction::lower_better},
        {"video_fid", "FID*", Direction::lower_better},
        {"frame_psnr", "PSNR", Direction::higher_better},
        {"frame_ssim", "SSIM", Direction::higher_better},
        {"frame_lpips", "Frame LPIPS*", Direction::lower_better},
        {"semantic_fidelity", "Semantic Fidelity*", Direction::higher_better},
        {"temporal_flickering", "TF", Direction::higher_better},
        {"motion_smoothness", "MS", Direction::higher_better},
        {"dynamic_degree", "DD", Direction::higher_better},
        {"aesthetic_quality", "AQ", Direction::higher_better},
        {"imaging_quality", "IQ", Direction::higher_better},
    };
    return m;
}

const std::vector<std::string>& ablation_metric_keys() {
    static const std::vector<std::string> k{"video_lpips",         "video_fid",         "semantic_fidelity",
                                            "temporal_flickering", "motion_smoothness", "dynamic_degree",
                                            "aesthetic_quality",   "imaging_quality"};
    return k;
}

VideoClip ModelGenerator::generate(const VideoClip& gt, const std::string& caption, bool clamp,
                                   std::uint64_t seed) const {
    SampleOptions o;
    o.steps = steps_;
    o.clamp_endpoints = clamp;
    o.cfg_scale = cfg_scale_;
    o.seed = seed;
    o.fps = gt.fps;
    const auto text = model_.text_encoder().encode(caption);
    return sample<float>(model_, gt.frame(0), gt.frame(gt.num_frames() - 1), text, gt.num_frames(), mol_, o);
}

VideoClip ClipDirGenerator::generate(const VideoClip& gt, const std::string&, bool, std::uint64_t) const {
    VideoClip c = read_clip(dir_ / (current_id + ".clp")).clip;
    if (c.num_frames() != gt.num_frames())
        throw PairingError(current_id + ": generated clip has " + std::to_string(c.num_frames()) + " frames, expected " +
                           std::to_string(gt.num_frames()));
    return c;
}

double log10_population_variance(std::span<const double> values) {
    if (values.size() < 2) throw StatisticsError("cross-scale variance needs at least 2 scales");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) return -std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    const double var = acc / n;
    if (var <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::log10(var);
}

std::string format_log10_variance(double v) {
    if (std::isnan(v)) return "n/a";
    if (v < -12.0) return "< -12";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

void BenchReport::aggregate() {
    per_scale.clear();
    all.clear();
    failed = 0;
    std::sort(clips.begin(), clips.end(), [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; });
    for (const auto& m : bench_metrics()) {
        if (std::find(unavailable.begin(), unavailable.end(), m.key) != unavailable.end()) continue;
        MetricResult pooled{m.key, 0.0, m.direction, {}};
        std::map<int, MetricResult> rows;
        for (const auto& c : clips) {
            if (c.failed) continue;
            const auto it = c.values.find(m.key);
            if (it == c.values.end()) continue;
            auto& r = rows.try_emplace(c.scale, MetricResult{m.key, 0.0, m.direction, {}}).first->second;
            r.per_clip_values.push_back(it->second);
            pooled.per_clip_values.push_back(it->second);
        }
        for (auto& [s, r] : rows) r.finalize();
        if (!pooled.per_clip_values.empty()) {
            pooled.finalize();
            all.emplace(m.key, pooled);
        }
        per_scale.emplace(m.key, std::move(rows));
    }
    for (const auto& c : clips) failed += c.failed ? 1 : 0;
}

std::map<std::string, double> BenchReport::cross_scale_variance() const {
    std::map<std::string, double> out;
    for (const auto& [key, rows] : per_scale) {
        std::vector<double> means;
        for (const auto& [s, r] : rows) means.push_back(r.value);
        out[key] = log10_population_variance(means);
    }
    return out;
}

namespace {

bool is_unavailable(const BenchReport& r, const std::string& key) {
    return std::find(r.unavailable.begin(), r.unavailable.end(), key) != r.unavailable.end();
}

std::string variance_cell(const BenchReport& r, const std::string& key) {
    if (is_unavailable(r, key)) return "n/a";
    const auto it = r.per_scale.find(key);
    if (it == r.per_scale.end() || it->second.size() < 2) return "n/a";
    std::vector<double> means;
    for (const auto& [s, m] : it->second) means.push_back(m.value);
    return format_log10_variance(log10_population_variance(means));
}

std::string scale_cell(const BenchReport& r, const std::string& key, int s) {
    if (is_unavailable(r, key)) return "n/a";
    const auto it = r.per_scale.find(key);
    if (it == r.per_scale.end()) return "absent";
    const auto jt = it->second.find(s);
    return jt == it->second.end() ? "absent" : fmt(jt->second.value);
}

std::string all_cell(const BenchReport& r, const std::string& key) {
    if (is_unavailable(r, key)) return "n/a";
    const auto it = r.all.find(key);
    return it == r.all.end() ? "absent" : fmt(it->second.value);
}

}  // namespace

std::string BenchReport::to_csv() const {
    std::ostringstream o;
    o << "# " << kBanner << "\n";
    o << "# log10Var: population variance over per-scale means; failed clips: " << failed << "\n";
    o << "metric,direction";
    for (int s : scales) o << "," << s;
    o << ",All,log10Var\n";
    for (const auto& m : bench_metrics()) {
        o << m.key << "," << (m.direction == Direction::higher_better ? "higher" : "lower");
        for (int s : scales) o << "," << scale_cell(*this, m.key, s);
        o << "," << all_cell(*this, m.key) << "," << variance_cell(*this, m.key) << "\n";
    }
    return o.str();
}

std::string BenchReport::to_markdown() const {
    std::ostringstream o;
    o << "> " << kBanner << ".\n>\n";
    o << "> Variance row: log10 of the population variance of the per-scale means. Failed clips: " << failed
      << ". n/a marks metrics whose predictor is not configured.\n\n";
    o << "| Frames |";
    for (const auto& m : bench_metrics()) o << " " << m.label << (m.direction == Direction::higher_better ? "↑" : "↓") << " |";
    o << "\n|---|";
    for (std::size_t i = 0; i < bench_metrics().size(); ++i) o << "---|";
    o << "\n";
    for (int s : scales) {
        o << "| " << s << " |";
        for (const auto& m : bench_metrics()) o << " " << scale_cell(*this, m.key, s) << " |";
        o << "\n";
    }
    o << "| All |";
    for (const auto& m : bench_metrics()) o << " " << all_cell(*this, m.key) << " |";
    o << "\n| log10 Var |";
    for (const auto& m : bench_metrics()) o << " " << variance_cell(*this, m.key) << " |";
    o << "\n";
    return o.str();
}

std::string BenchReport::per_clip_csv() const {
    std::ostringstream o;
    o << "clip_id,scale,status";
    for (const auto& m : bench_metrics()) o << "," << m.key;
    o << "\n";
    for (const auto& c : clips) {
        o << c.clip_id << "," << c.scale << "," << (c.failed ? "failed" : "ok");
        for (const auto& m : bench_metrics()) {
            const auto it = c.values.find(m.key);
            o << "," << (it == c.values.end() ? std::string("") : fmt_exact(it->second));
        }
        o << "\n";
    }
    return o.str();
}

BenchReport bench_run(const ClipGenerator& generator, const Manifest& testset, const std::filesystem::path& dir,
                      const BenchOptions& opts, const std::function<void(std::size_t, std::size_t)>& progress) {
    BenchReport report;
    report.scales = opts.scales;
    const RandomConvEmbedder conv(opts.bench.embedder_seed);
    const ToyProbeEmbedder probe = ToyProbeEmbedder::fit(opts.data, opts.bench.embedder_seed, opts.bench.probe_clips);
    const auto flow = make_flow_estimator(opts.bench.flow_estimator);
    std::unique_ptr<FrameInterpolator> interp;
    if (opts.bench.interpolator == "average") interp = std::make_unique<AverageInterpolator>();
    else if (opts.bench.interpolator == "flow_warp") interp = std::make_unique<FlowWarpInterpolator>(*flow);
    else throw ConfigError("bench.interpolator must be average or flow_warp");

    const Rng root = Rng(opts.bench.seed).split("bench");
    Manifest sorted = testset;
    sorted.sort();
    bool aq_ok = true, iq_ok = true;
    std::size_t done = 0;
    for (const auto& rec : sorted.records) {
        ClipEvaluation ev;
        ev.clip_id = rec.clip_id;
        ev.scale = rec.scale_s;
        try {
            const VideoClip gt = load_record_clip(dir, rec);
            const std::uint64_t seed = root.split(rec.clip_id).key();
            if (auto* d = dynamic_cast<const ClipDirGenerator*>(&generator)) d->current_id = rec.clip_id;
            const VideoClip gen = generator.generate(gt, rec.caption, opts.bench.clamp_endpoints, seed);
            if (gen.num_frames() != gt.num_frames() || !gen.frames.same_shape(gt.frames))
                throw PairingError("generated clip shape differs from ground truth");
            const VideoClip gen_ff = opts.bench.clamp_endpoints && opts.bench.unclamped_frame_fidelity
                                         ? generator.generate(gt, rec.caption, false, seed)
                                         : gen;
            const FrameFidelity ff = frame_fidelity(gen_ff, gt.frame(0), gt.frame(gt.num_frames() - 1), conv);
            ev.values["video_lpips"] = perceptual_distance(gen, gt, conv);
            ev.values["video_fid"] = frechet_feature_distance(frames_of(gen), frames_of(gt), conv);
            ev.values["frame_psnr"] = ff.psnr_mean();
            ev.values["frame_ssim"] = ff.ssim_mean();
            ev.values["frame_lpips"] = ff.perceptual_mean();
            ev.values["semantic_fidelity"] = semantic_fidelity(gen, rec.caption, probe);
            ev.values["temporal_flickering"] = temporal_flickering(gen);
            ev.values["motion_smoothness"] = motion_smoothness(gen, *interp);
            ev.values["dynamic_degree"] = dynamic_degree(gen, *flow);
            try {
                ev.values["aesthetic_quality"] = aesthetic_quality(gen);
            } catch (const NotConfiguredError&) {
                aq_ok = false;
            }
            try {
                ev.values["imaging_quality"] = imaging_quality(gen);
            } catch (const NotConfiguredError&) {
                iq_ok = false;
            }
            for (const auto& [k, v] : ev.values)
                if (!std::isfinite(v)) throw StatisticsError("metric " + k + " is not finite");
        } catch (const Error& e) {
            ev.failed = true;
            ev.error = e.what();
            ev.values.clear();
        }
        report.clips.push_back(std::move(ev));
        if (progress) progress(++done, sorted.records.size());
    }
    if (!aq_ok) report.unavailable.push_back("aesthetic_quality");
    if (!iq_ok) report.unavailable.push_back("imaging_quality");
    report.aggregate();
    return report;
}

void write_bench_report(const BenchReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto put = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + (dir / name).string());
        out << text;
    };
    put("report.csv", report.to_csv());
    put("report.md", report.to_markdown());
    put("per_clip.csv", report.per_clip_csv());
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
    std::ostringstream o;
    o << "> " << kBanner << ".\n\n";
    o << "| Setting |";
    for (const auto& k : ablation_metric_keys()) {
        const auto& m = spec(k);
        o << " " << m.label << (m.direction == Direction::higher_better ? "↑" : "↓") << " |";
    }
    o << "\n|---|";
    for (std::size_t i = 0; i < ablation_metric_keys().size(); ++i) o << "---|";
    o << "\n";
    for (const auto& r : rows) {
        o << "| " << r.label << " |";
        for (const auto& k : ablation_metric_keys()) o << " " << (r.ok ? all_cell(r.report, k) : "failed") << " |";
        o << "\n";
    }
    o << "\nLog10-transformed variance across frame counts (population variance of per-scale means):\n\n";
    o << "| Setting |";
    for (const auto& k : ablation_metric_keys()) o << " " << spec(k).label << " |";
    o << "\n|---|";
    for (std::size_t i = 0; i < ablation_metric_keys().size(); ++i) o << "---|";
    o << "\n";
    for (const auto& r : rows) {
        o << "| " << r.label << " |";
        for (const auto& k : ablation_metric_keys()) o << " " << (r.ok ? variance_cell(r.report, k) : "failed") << " |";
        o << "\n";
    }
    bool any_failed = false;
    for (const auto& r : rows)
        if (!r.ok) {
            if (!any_failed) o << "\nFailures:\n\n";
            any_failed = true;
            o << "- " << r.label << ": " << r.error << "\n";
        }
    return o.str();
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream o;
    o << "# " << kBanner << "\n";
    o << "setting,row";
    for (const auto& k : ablation_metric_keys()) o << "," << k;
    o << "\n";
    for (const auto& r : rows) {
        o << r.label << ",All";
        for (const auto& k : ablation_metric_keys()) o << "," << (r.ok ? all_cell(r.report, k) : "failed");
        o << "\n" << r.label << ",log10Var";
        for (const auto& k : ablation_metric_keys()) o << "," << (r.ok ? variance_cell(r.report, k) : "failed");
        o << "\n";
    }
    return o.str();
}

}  // namespace semfi
