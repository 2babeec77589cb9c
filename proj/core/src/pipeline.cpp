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

#include "semfi/pipeline.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>

#include "semfi/clip_io.hpp"
#include "semfi/errors.hpp"
#include "semfi/synth.hpp"

namespace semfi {

bool passes_candidate_filter(int frames, int fps, int f_max) {
    return fps <= 30 && frames >= f_max && frames <= 4 * f_max;
}

Manifest filter_candidates(const Manifest& corpus, int f_max) {
    if (f_max < 2) throw ConfigError("f_max must be at least 2");
    Manifest out;
    for (const auto& r : corpus.records)
        if (passes_candidate_filter(r.N, r.fps, f_max)) out.records.push_back(r);
    return out;
}

std::vector<float> DownsampledPixelFeatures::extract(const Image& img) const {
    const Image g = area_resize(to_gray(img), size_, size_);
    std::vector<float> f(g.data.size());
    std::transform(g.data.begin(), g.data.end(), f.begin(), [](float v) { return v - 0.5f; });
    return f;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw ShapeError("feature vectors differ in length");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += static_cast<double>(a[i]) * b[i];
        aa += static_cast<double>(a[i]) * a[i];
        bb += static_cast<double>(b[i]) * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw DegenerateFeatureError("zero feature vector has no direction");
    return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double clip_score(const Image& first, const Image& last, const FeatureExtractor& fx) {
    if (!first.same_shape(last)) throw ShapeError("clip score frames differ in shape");
    const auto fa = fx.extract(first), fb = fx.extract(last);
    return cosine_similarity(fa, fb);
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw StatisticsError("percentile of an empty set");
    if (p < 0.0 || p > 100.0) throw ArgumentError("percentile must lie in [0, 100]");
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

void to_json(nlohmann::json& j, const ScoreThresholds& t) {
    j = {{"clip_low", t.clip_low}, {"clip_high", t.clip_high}, {"flow_low", t.flow_low}, {"flow_high", t.flow_high}};
}

ScoreThresholds resolve_thresholds(const ThresholdConfig& cfg, std::span<const double> clip_scores,
                                   std::span<const double> flow_scores) {
    ScoreThresholds t;
    if (cfg.mode == ThresholdMode::absolute) {
        t = {cfg.clip_low, cfg.clip_high, cfg.flow_low, cfg.flow_high};
    } else {
        if (cfg.pct_low > cfg.pct_high) throw ConfigError("data.thresholds.pct_low exceeds pct_high");
        const std::vector<double> sc(clip_scores.begin(), clip_scores.end()), sf(flow_scores.begin(), flow_scores.end());
        t = {percentile(sc, cfg.pct_low), percentile(sc, cfg.pct_high), percentile(sf, cfg.pct_low),
             percentile(sf, cfg.pct_high)};
    }
    if (t.clip_low > t.clip_high) throw ConfigError("clip-score low threshold exceeds high threshold");
    if (t.flow_low > t.flow_high) throw ConfigError("flow-score low threshold exceeds high threshold");
    return t;
}

Manifest threshold_filter(const Manifest& scored, const ScoreThresholds& t) {
    Manifest out;
    for (const auto& r : scored.records)
        if (t.admits(r.S_c, r.S_f)) out.records.push_back(r);
    return out;
}

std::vector<CutPlan> plan_cuts(int frames, std::span<const int> scales) {
    std::vector<CutPlan> out;
    for (int s : scales)
        if (s >= 1 && s <= frames) out.push_back({s, frames / 2 - s / 2});
    return out;
}

VideoClip cut(const VideoClip& video, int start, int length) {
    if (start < 0 || length < 1 || start + length > video.num_frames())
        throw RangeError("cut [" + std::to_string(start) + ", " + std::to_string(start + length) + ") outside " +
                         std::to_string(video.num_frames()) + " frames");
    VideoClip c{Volume<float>(length, video.height(), video.width(), video.channels()), video.fps, video.caption};
    const auto src = video.frames.data.begin() + static_cast<std::ptrdiff_t>(start * video.frames.frame_size());
    std::copy(src, src + static_cast<std::ptrdiff_t>(c.frames.size()), c.frames.data.begin());
    return c;
}

std::vector<VideoClip> multi_scale_cut(const VideoClip& video, std::span<const int> scales) {
    std::vector<VideoClip> out;
    const auto plans = plan_cuts(video.num_frames(), scales);
    if (plans.empty())
        spdlog::warn("video with {} frames is shorter than every cut scale; no clips emitted", video.num_frames());
    for (const auto& p : plans) out.push_back(cut(video, p.start, p.scale));
    return out;
}

std::optional<std::string> ProceduralCaptioner::caption(const VideoClip&, const nlohmann::json& meta) const {
    if (!meta.contains("scene")) return std::nullopt;
    try {
        const auto text = procedural_caption(meta.at("scene").get<SynthScene>());
        if (text.empty()) return std::nullopt;
        return text;
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::optional<std::string> HttpCaptioner::caption(const VideoClip& clip, const nlohmann::json& meta) const {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint_, m, url)) return std::nullopt;
    try {
        httplib::Client cli(m[1].str());
        const auto secs = static_cast<time_t>(timeout_s_);
        const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        const nlohmann::json body = {
            {"N", clip.num_frames()}, {"H", clip.height()}, {"W", clip.width()}, {"fps", clip.fps}, {"meta", meta}};
        const auto res = cli.Post(m[2].matched ? m[2].str() : "/", body.dump(), "application/json");
        if (!res || res->status != 200) return std::nullopt;
        const auto j = nlohmann::json::parse(res->body);
        const auto text = j.at("caption").get<std::string>();
        if (text.empty()) return std::nullopt;
        return text;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::unique_ptr<Captioner> make_captioner(const DataConfig& cfg) {
    if (cfg.captioner == "procedural") return std::make_unique<ProceduralCaptioner>();
    if (cfg.captioner == "http") return std::make_unique<HttpCaptioner>(cfg.captioner_endpoint);
    throw ConfigError("data.captioner must be procedural or http");
}

Annotation annotate(const VideoClip& clip, const nlohmann::json& meta, const Captioner& captioner) {
    const auto text = captioner.caption(clip, meta);
    if (!text) return {"", true};
    return {*text, false};
}

namespace {

namespace fs = std::filesystem;

ClipDtype storage(const DataConfig& cfg) { return parse_clip_dtype(cfg.storage); }

Manifest load_stage(const fs::path& file, const char* producer) {
    if (!fs::exists(file)) throw DataError(file.string() + " not found; run `semfi data " + producer + "` first");
    return Manifest::load(file);
}

std::unique_ptr<FlowEstimator> scoring_estimator(const DataConfig& cfg, const nlohmann::json& meta) {
    if (cfg.flow_estimator == "ground_truth") {
        if (!meta.contains("scene")) throw DataError("ground-truth flow needs synthetic scene metadata");
        return std::make_unique<SceneFlow>(meta.at("scene").get<SynthScene>());
    }
    return make_flow_estimator(cfg.flow_estimator);
}

std::string clip_id(const std::string& video_id, int scale) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_s%03d", scale);
    return video_id + buf;
}

/// Cuts every scale of one video into dir/clips and returns the records.
std::vector<ManifestRecord> cut_video(const DataConfig& cfg, const StoredClip& video, const ManifestRecord& src,
                                      const fs::path& dir) {
    std::vector<ManifestRecord> out;
    const auto plans = plan_cuts(video.clip.num_frames(), cfg.scales);
    if (plans.empty())
        spdlog::warn("{}: {} frames is shorter than every cut scale", src.clip_id, video.clip.num_frames());
    for (const auto& p : plans) {
        VideoClip c = cut(video.clip, p.start, p.scale);
        c.caption.clear();
        nlohmann::json meta = video.meta;
        if (meta.contains("scene")) meta["scene"]["frame_offset"] = p.start;
        meta["source_video_id"] = src.clip_id;
        meta["scale_s"] = p.scale;
        meta["start_frame"] = p.start;
        ManifestRecord r = src;
        r.clip_id = clip_id(src.clip_id, p.scale);
        r.path = "clips/" + r.clip_id + ".clp";
        r.N = p.scale;
        r.scale_s = p.scale;
        r.start_frame = p.start;
        r.source_video_id = src.clip_id;
        r.caption.clear();
        write_clip(dir / r.path, c, storage(cfg), meta);
        out.push_back(std::move(r));
    }
    return out;
}

Manifest annotate_manifest(const DataConfig& cfg, const Manifest& cuts, const fs::path& dir, std::size_t& flagged) {
    const auto captioner = make_captioner(cfg);
    Manifest out;
    for (auto r : cuts.records) {
        StoredClip sc = read_clip(dir / r.path);
        const Annotation a = annotate(sc.clip, sc.meta, *captioner);
        r.caption = a.caption;
        r.caption_missing = a.caption_missing;
        if (a.caption_missing) ++flagged;
        sc.clip.caption = a.caption;
        write_clip(dir / r.path, sc.clip, sc.dtype, sc.meta);
        out.records.push_back(std::move(r));
    }
    return out;
}

}  // namespace

StageSummary stage_synth(const DataConfig& cfg, const fs::path& out) {
    Manifest m;
    for (int i = 0; i < cfg.num_videos; ++i) {
        const SynthVideo v = synth_corpus_video(cfg, cfg.seed, i);
        ManifestRecord r;
        r.clip_id = v.video_id;
        r.path = "raw/" + v.video_id + ".clp";
        r.N = v.clip.num_frames();
        r.H = v.clip.height();
        r.W = v.clip.width();
        r.fps = v.clip.fps;
        r.source_video_id = v.video_id;
        write_clip(out / r.path, v.clip, storage(cfg), {{"scene", v.scene}});
        m.records.push_back(r);
    }
    m.save(out / "raw" / "videos.jsonl");
    return {"synth", static_cast<std::size_t>(cfg.num_videos), m.records.size(), 0};
}

StageSummary stage_filter(const DataConfig& cfg, const fs::path& out) {
    const Manifest raw = load_stage(out / "raw" / "videos.jsonl", "synth");
    const Manifest kept = filter_candidates(raw, cfg.f_max);
    kept.save(out / "filtered.jsonl");
    return {"filter", raw.records.size(), kept.records.size(), 0};
}

StageSummary stage_score(const DataConfig& cfg, const fs::path& out) {
    Manifest m = load_stage(out / "filtered.jsonl", "filter");
    const DownsampledPixelFeatures fx(cfg.feature_size);
    std::size_t degenerate = 0;
    std::vector<double> sc, sf;
    for (auto& r : m.records) {
        const StoredClip v = read_clip(out / r.path);
        const Image first = v.clip.frame(0), last = v.clip.frame(v.clip.num_frames() - 1);
        try {
            r.S_c = clip_score(first, last, fx);
        } catch (const DegenerateFeatureError&) {
            r.S_c = 1.0;
            ++degenerate;
        }
        const auto est = scoring_estimator(cfg, v.meta);
        r.S_f = flow_score(v.clip, 0, v.clip.num_frames() - 1, *est);
        sc.push_back(r.S_c);
        sf.push_back(r.S_f);
    }
    m.save(out / "scored.jsonl");
    if (m.records.empty()) throw DataError("no candidate videos survived filtering");
    const ScoreThresholds t = resolve_thresholds(cfg.thresholds, sc, sf);
    {
        std::ofstream th(out / "thresholds.json", std::ios::trunc);
        th << nlohmann::json(t).dump(2) << "\n";
    }
    const Manifest kept = threshold_filter(m, t);
    kept.save(out / "retained.jsonl");
    return {"score", m.records.size(), kept.records.size(), degenerate};
}

StageSummary stage_cut(const DataConfig& cfg, const fs::path& out) {
    const Manifest kept = load_stage(out / "retained.jsonl", "score");
    Manifest cuts;
    for (const auto& r : kept.records) {
        const StoredClip v = read_clip(out / r.path);
        for (auto& c : cut_video(cfg, v, r, out)) cuts.records.push_back(std::move(c));
    }
    cuts.save(out / "cut.jsonl");
    return {"cut", kept.records.size(), cuts.records.size(), 0};
}

StageSummary stage_annotate(const DataConfig& cfg, const fs::path& out) {
    const Manifest cuts = load_stage(out / "cut.jsonl", "cut");
    std::size_t flagged = 0;
    const Manifest m = annotate_manifest(cfg, cuts, out, flagged);
    m.save(out / "manifest.jsonl");
    return {"annotate", cuts.records.size(), m.records.size(), flagged};
}

StageSummary stage_testset(const DataConfig& cfg, const fs::path& out) {
    const fs::path dir = out / "test";
    Manifest cuts;
    const DownsampledPixelFeatures fx(cfg.feature_size);
    for (int i = 0; i < cfg.test_videos; ++i) {
        const SynthVideo v = synth_test_video(cfg, cfg.seed, i);
        ManifestRecord r;
        r.clip_id = v.video_id;
        r.N = v.clip.num_frames();
        r.H = v.clip.height();
        r.W = v.clip.width();
        r.fps = v.clip.fps;
        r.source_video_id = v.video_id;
        try {
            r.S_c = clip_score(v.clip.frame(0), v.clip.frame(r.N - 1), fx);
        } catch (const DegenerateFeatureError&) {
            r.S_c = 1.0;
        }
        const StoredClip sc{v.clip, storage(cfg), {{"scene", v.scene}}};
        for (auto& c : cut_video(cfg, sc, r, dir)) cuts.records.push_back(std::move(c));
    }
    std::size_t flagged = 0;
    const Manifest m = annotate_manifest(cfg, cuts, dir, flagged);
    m.save(dir / "manifest.jsonl");
    return {"testset", static_cast<std::size_t>(cfg.test_videos), m.records.size(), flagged};
}

std::vector<StageSummary> run_data_pipeline(const DataConfig& cfg, const fs::path& out) {
    return {stage_synth(cfg, out), stage_filter(cfg, out),   stage_score(cfg, out),
            stage_cut(cfg, out),   stage_annotate(cfg, out), stage_testset(cfg, out)};
}

VideoClip load_record_clip(const fs::path& manifest_dir, const ManifestRecord& r) {
    StoredClip sc = read_clip(manifest_dir / r.path);
    if (sc.clip.num_frames() != r.N) throw DataError(r.clip_id + ": clip has " + std::to_string(sc.clip.num_frames()) +
                                                      " frames, manifest says " + std::to_string(r.N));
    return std::move(sc.clip);
}

}  // namespace semfi
