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
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "semfi/config.hpp"
#include "semfi/denoiser.hpp"
#include "semfi/lora.hpp"
#include "semfi/manifest.hpp"
#include "semfi/metrics.hpp"

namespace semfi {

struct MetricSpec {
    std::string key;
    std::string label;
    Direction direction;
};

/// Report columns in comparison-table order.
const std::vector<MetricSpec>& bench_metrics();
/// The subset shown in ablation and variance tables (no frame fidelity).
const std::vector<std::string>& ablation_metric_keys();

/// Produces the clip to evaluate for one testset record.
class ClipGenerator {
public:
    virtual ~ClipGenerator() = default;
    virtual VideoClip generate(const VideoClip& ground_truth, const std::string& caption, bool clamp_endpoints,
                               std::uint64_t seed) const = 0;
};

/// Samples from a denoiser (+ optional adapters) given the ground-truth endpoints.
class ModelGenerator final : public ClipGenerator {
public:
    ModelGenerator(const Denoiser<float>& model, const MoLState* mol, int steps, double cfg_scale)
        : model_(model), mol_(mol), steps_(steps), cfg_scale_(cfg_scale) {}
    VideoClip generate(const VideoClip& gt, const std::string& caption, bool clamp, std::uint64_t seed) const override;

private:
    const Denoiser<float>& model_;
    const MoLState* mol_;
    int steps_;
    double cfg_scale_;
};

/// Returns the ground truth itself (self-evaluation).
class GroundTruthGenerator final : public ClipGenerator {
public:
    VideoClip generate(const VideoClip& gt, const std::string&, bool, std::uint64_t) const override { return gt; }
};

/// Reads pre-generated clips named <clip_id>.clp from a directory.
class ClipDirGenerator final : public ClipGenerator {
public:
    explicit ClipDirGenerator(std::filesystem::path dir) : dir_(std::move(dir)) {}
    VideoClip generate(const VideoClip& gt, const std::string& caption, bool clamp, std::uint64_t seed) const override;
    /// Set before each call by bench_run.
    mutable std::string current_id;

private:
    std::filesystem::path dir_;
};

struct ClipEvaluation {
    std::string clip_id;
    int scale = 0;
    bool failed = false;
    std::string error;
    std::map<std::string, double> values;
};

/// log10 of the population variance; -inf when the variance is exactly zero.
/// StatisticsError with fewer than 2 values.
double log10_population_variance(std::span<const double> values);
/// "< -12" for -inf or anything below -12, otherwise fixed notation.
std::string format_log10_variance(double v);

struct BenchReport {
    std::vector<int> scales;
    /// Sorted by clip_id.
    std::vector<ClipEvaluation> clips;
    /// metric -> scale -> result; absent scales have no entry.
    std::map<std::string, std::map<int, MetricResult>> per_scale;
    /// Pooled over every successful clip.
    std::map<std::string, MetricResult> all;
    /// Metrics whose predictor is unavailable.
    std::vector<std::string> unavailable;
    int failed = 0;

    /// Rebuilds per_scale and all from clips.
    void aggregate();
    /// Per metric, over the per-scale means. StatisticsError with < 2 scales.
    std::map<std::string, double> cross_scale_variance() const;

    std::string to_csv() const;
    std::string to_markdown() const;
    std::string per_clip_csv() const;
};

struct BenchOptions {
    BenchConfig bench;
    DataConfig data;
    std::vector<int> scales;
};

/// Evaluates every testset record; a clip that fails is recorded and skipped.
BenchReport bench_run(const ClipGenerator& generator, const Manifest& testset,
                      const std::filesystem::path& manifest_dir, const BenchOptions& opts,
                      const std::function<void(std::size_t, std::size_t)>& progress = {});

/// Writes report.csv, report.md and per_clip.csv into dir.
void write_bench_report(const BenchReport& report, const std::filesystem::path& dir);

struct AblationRow {
    std::string label;
    bool ok = false;
    std::string error;
    BenchReport report;
};

/// Ablation table layout plus the log10-variance block.
std::string ablation_markdown(const std::vector<AblationRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace semfi
