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
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semfi/bench.hpp"
#include "semfi/config.hpp"
#include "semfi/manifest.hpp"
#include "semfi/pipeline.hpp"
#include "semfi/trainer.hpp"

namespace semfi {

/// Content hash of the canonical JSON serialization.
std::string config_hash(const ExperimentConfig& cfg);

/// Record of inputs, outputs and settings written next to every command's outputs as run.json.
struct RunRecord {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    /// path -> content hash
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
    void save(const std::filesystem::path& dir) const;
};

/// DataError listing the scales of `required` absent from the manifest.
void require_scales(const Manifest& manifest, const std::vector<int>& required);

std::vector<TrainingExample> load_training_examples(const Manifest& manifest,
                                                    const std::filesystem::path& manifest_dir,
                                                    const Denoiser<float>& model, const std::vector<int>& scales);

struct DataResult {
    std::vector<StageSummary> stages;
    std::string manifest_checksum;
    std::string testset_checksum;
};

/// `stage` is synth|filter|score|cut|annotate|testset|all.
DataResult cmd_data(const DataConfig& cfg, const std::string& stage, const std::filesystem::path& out);

inline constexpr int kLossWindow = 100;

struct LossSummary {
    /// Mean of the first `window` losses.
    double initial = 0.0;
    /// Trailing-window mean at the last step.
    double final = 0.0;
    double ratio() const { return initial > 0.0 ? final / initial : 0.0; }
};

/// StatisticsError on an empty log.
LossSummary summarize_losses(const std::vector<LossRecord>& log, int window = kLossWindow);

struct TrainResult {
    std::vector<LossRecord> log;
    std::filesystem::path checkpoint;
    LossSummary summary;
};

/// Reads <data_dir>/manifest.jsonl, trains, writes checkpoint.ckpt, loss.csv,
/// config.json and run.json into out.
TrainResult cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out, const ProgressFn& progress = {});

struct SampleRequest {
    std::filesystem::path checkpoint;
    std::filesystem::path first;
    std::filesystem::path last;
    std::string text;
    int frames = 0;
    int steps = 25;
    std::uint64_t seed = 0;
    double cfg_scale = 1.0;
    bool clamp_endpoints = true;
    int fps = 24;
    std::filesystem::path out;
};

/// Writes a clip whose header records the routed expert; returns that header meta.
nlohmann::json cmd_sample(const SampleRequest& req);

/// `checkpoint` empty = evaluate the ground truth against itself.
BenchReport cmd_bench(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                      const std::filesystem::path& testset_dir, const std::filesystem::path& out,
                      const std::function<void(std::size_t, std::size_t)>& progress = {});

inline constexpr const char* kRowWithoutMultiFrame = "w/o Multi-frame";
inline constexpr const char* kRowWithoutMoL = "w/o MoL";
inline constexpr const char* kRowFull = "Full Model";

/// The three ablation settings in table order; each differs from `base` in one key.
std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(const ExperimentConfig& base);

/// Top-level keys whose values differ ("mol.enabled", "data.scales", ...).
std::vector<std::string> config_diff(const ExperimentConfig& a, const ExperimentConfig& b);

struct AblationResult {
    std::vector<AblationRow> rows;
    std::string data_checksum;
};

/// Builds data once (unless data_dir already holds a manifest), then trains and
/// benches every variant on it. A failing variant is annotated, not fatal.
AblationResult cmd_ablate(const ExperimentConfig& base, const std::filesystem::path& data_dir,
                          const std::filesystem::path& out,
                          const std::function<void(const std::string&)>& log = {});

/// Parses a per-clip CSV written by the bench.
BenchReport read_per_clip_csv(const std::string& text, const std::vector<int>& scales);

/// Rebuilds report.csv/report.md from per_clip.csv in `run_dir` and, when a
/// loss.csv is present, summarizes it into loss_summary.json.
nlohmann::json cmd_report(const std::filesystem::path& run_dir, const std::vector<int>& scales);

}  // namespace semfi
