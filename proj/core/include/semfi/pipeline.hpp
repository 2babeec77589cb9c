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

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semfi/config.hpp"
#include "semfi/flow.hpp"
#include "semfi/manifest.hpp"
#include "semfi/video.hpp"

namespace semfi {

/// fps <= 30 and f_max <= frames <= 4 f_max, both bounds inclusive.
bool passes_candidate_filter(int frames, int fps, int f_max);

/// Records of `corpus` that pass the candidate filter.
Manifest filter_candidates(const Manifest& corpus, int f_max = 81);

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<float> extract(const Image& img) const = 0;
};

/// size x size grayscale area downsample, minus 0.5, flattened.
class DownsampledPixelFeatures final : public FeatureExtractor {
public:
    explicit DownsampledPixelFeatures(int size = 16) : size_(size) {}
    std::vector<float> extract(const Image& img) const override;

private:
    int size_;
};

/// Cosine similarity of extractor features. DegenerateFeatureError when either
/// feature vector is zero; ShapeError when the frames differ in shape.
double clip_score(const Image& first, const Image& last, const FeatureExtractor& fx);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Linear interpolation between closest ranks (numpy's default), p in [0, 100].
double percentile(std::vector<double> values, double p);

struct ScoreThresholds {
    double clip_low = -1.0;
    double clip_high = 1.0;
    double flow_low = 0.0;
    double flow_high = 1e9;

    bool admits(double s_c, double s_f) const {
        return clip_low <= s_c && s_c <= clip_high && flow_low <= s_f && s_f <= flow_high;
    }
};

void to_json(nlohmann::json& j, const ScoreThresholds& t);

/// Absolute mode copies the bounds; percentile mode takes them from the
/// scores. ConfigError when a low bound exceeds its high bound.
ScoreThresholds resolve_thresholds(const ThresholdConfig& cfg, std::span<const double> clip_scores,
                                   std::span<const double> flow_scores);

/// Records whose (S_c, S_f) fall inside the thresholds, bounds inclusive.
Manifest threshold_filter(const Manifest& scored, const ScoreThresholds& t);

struct CutPlan {
    int scale = 0;
    int start = 0;
};

/// One cut per s <= f centered on the midpoint: start = floor(f/2) - floor(s/2).
std::vector<CutPlan> plan_cuts(int frames, std::span<const int> scales);
/// Empty (with a warning) when the video is shorter than every scale.
std::vector<VideoClip> multi_scale_cut(const VideoClip& video, std::span<const int> scales);
VideoClip cut(const VideoClip& video, int start, int length);

class Captioner {
public:
    virtual ~Captioner() = default;
    /// nullopt on failure; the record is flagged, not dropped.
    virtual std::optional<std::string> caption(const VideoClip& clip, const nlohmann::json& meta) const = 0;
};

/// Template caption from the synthetic scene stored under meta["scene"].
class ProceduralCaptioner final : public Captioner {
public:
    std::optional<std::string> caption(const VideoClip& clip, const nlohmann::json& meta) const override;
};

/// POSTs {N, H, W, fps, meta} as JSON to the endpoint and reads {"caption": ...}.
class HttpCaptioner final : public Captioner {
public:
    explicit HttpCaptioner(std::string endpoint, double timeout_s = 2.0)
        : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {}
    std::optional<std::string> caption(const VideoClip& clip, const nlohmann::json& meta) const override;

private:
    std::string endpoint_;
    double timeout_s_;
};

std::unique_ptr<Captioner> make_captioner(const DataConfig& cfg);

struct Annotation {
    std::string caption;
    bool caption_missing = false;
};

Annotation annotate(const VideoClip& clip, const nlohmann::json& meta, const Captioner& captioner);

/// On-disk stages under one output directory:
///   raw/<video>.clp + raw/videos.jsonl  (synth)
///   filtered.jsonl                      (filter)
///   scored.jsonl, thresholds.json, retained.jsonl (score)
///   clips/<clip>.clp + cut.jsonl        (cut)
///   manifest.jsonl                      (annotate)
///   test/clips + test/manifest.jsonl    (testset)
struct StageSummary {
    std::string stage;
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::size_t flagged = 0;
};

StageSummary stage_synth(const DataConfig& cfg, const std::filesystem::path& out);
StageSummary stage_filter(const DataConfig& cfg, const std::filesystem::path& out);
StageSummary stage_score(const DataConfig& cfg, const std::filesystem::path& out);
StageSummary stage_cut(const DataConfig& cfg, const std::filesystem::path& out);
StageSummary stage_annotate(const DataConfig& cfg, const std::filesystem::path& out);
StageSummary stage_testset(const DataConfig& cfg, const std::filesystem::path& out);
std::vector<StageSummary> run_data_pipeline(const DataConfig& cfg, const std::filesystem::path& out);

/// Clip for a manifest record, resolved relative to the manifest directory.
VideoClip load_record_clip(const std::filesystem::path& manifest_dir, const ManifestRecord& r);

}  // namespace semfi
