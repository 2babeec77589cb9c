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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace semfi {

inline constexpr const char* kExperimentSchema = "semfi.experiment/1";

enum class PredictionTarget { epsilon, velocity };
enum class TrainMode { staged, scratch };
enum class ThresholdMode { percentile, absolute };

struct PatchSize {
    int t = 1;
    int h = 4;
    int w = 4;
    int volume() const { return t * h * w; }
    bool operator==(const PatchSize&) const = default;
};

/// Architecture and diffusion settings of the toy denoiser.
struct DenoiserConfig {
    int image_height = 32;
    int image_width = 32;
    int channels = 3;
    /// Spatial average-pool factor mapping pixels to the latent grid (1 or 2).
    int latent_pool = 2;
    PatchSize patch;
    int embed_dim = 64;
    int num_layers = 4;
    int num_heads = 4;
    int ff_mult = 4;
    int d_text = 32;
    int max_text_tokens = 8;
    int text_buckets = 512;
    int max_frames = 81;
    int noise_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.028;
    PredictionTarget prediction_target = PredictionTarget::epsilon;
    /// Seed of the frozen text table and image encoder.
    std::uint64_t encoder_seed = 7;

    int latent_height() const { return image_height / latent_pool; }
    int latent_width() const { return image_width / latent_pool; }
    int latent_channels() const { return channels; }
    /// noisy latent + guidance frames + one mask channel
    int input_channels() const { return 2 * latent_channels() + 1; }
    int head_dim() const { return embed_dim / num_heads; }

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

struct MoLConfig {
    int rank = 16;
    double alpha = 16.0;
    std::vector<int> scales{5, 9, 17, 33, 65, 81};
    /// false = single universal LoRA ("w/o MoL")
    bool enabled = true;
    /// false = train only on `single_scale` clips ("w/o Multi-frame")
    bool multi_frame_training = true;
    int single_scale = 65;

    void validate() const;
};

struct ThresholdConfig {
    ThresholdMode mode = ThresholdMode::percentile;
    double pct_low = 5.0;
    double pct_high = 95.0;
    double clip_low = -1.0;
    double clip_high = 1.0;
    double flow_low = 0.0;
    double flow_high = 1e9;
};

struct DataConfig {
    int num_videos = 120;
    int height = 32;
    int width = 32;
    int channels = 3;
    std::vector<int> fps_choices{24, 25, 30, 60};
    int f_max = 81;
    int max_shapes = 3;
    double motion_amplitude = 1.0;
    /// Scales emitted by the cutter and used for training (subset of mol.scales).
    std::vector<int> scales{5, 9, 17, 33, 65, 81};
    int feature_size = 16;
    /// "pyramid_lk" or "ground_truth"
    std::string flow_estimator = "pyramid_lk";
    ThresholdConfig thresholds;
    int test_videos = 20;
    /// "uint8" or "float32"
    std::string storage = "uint8";
    /// "procedural" or "http"
    std::string captioner = "procedural";
    std::string captioner_endpoint;
    /// Corpus seed; `semfi data --seed` overrides it.
    std::uint64_t seed = 0;
};

struct TrainConfig {
    TrainMode mode = TrainMode::staged;
    int epochs = 1;
    /// Adapter (or joint, in scratch mode) steps; 0 derives the count from epochs.
    int steps = 0;
    /// Base pretraining steps run before the adapter phase in staged mode.
    int pretrain_steps = 0;
    int batch_size = 8;
    double lr = 1e-4;
    double pretrain_lr = 1e-3;
    double weight_decay = 0.0;
    double grad_clip = 1.0;
    std::uint64_t seed = 0;
    int log_every = 1;
};

struct BenchConfig {
    int sample_steps = 25;
    bool clamp_endpoints = true;
    /// Frame fidelity from a separate unclamped sample (otherwise it is vacuous).
    bool unclamped_frame_fidelity = true;
    double cfg_scale = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t embedder_seed = 11;
    /// "average" or "flow_warp"
    std::string interpolator = "average";
    std::string flow_estimator = "pyramid_lk";
    int probe_clips = 240;
};

struct ExperimentConfig {
    std::string schema = kExperimentSchema;
    DenoiserConfig model;
    MoLConfig mol;
    DataConfig data;
    TrainConfig train;
    BenchConfig bench;

    /// Scales the trainer draws batches from.
    std::vector<int> training_scales() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const PatchSize& p);
void from_json(const nlohmann::json& j, PatchSize& p);
void to_json(nlohmann::json& j, const DenoiserConfig& c);
void from_json(const nlohmann::json& j, DenoiserConfig& c);
void to_json(nlohmann::json& j, const MoLConfig& c);
void from_json(const nlohmann::json& j, MoLConfig& c);
void to_json(nlohmann::json& j, const ThresholdConfig& c);
void from_json(const nlohmann::json& j, ThresholdConfig& c);
void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const BenchConfig& c);
void from_json(const nlohmann::json& j, BenchConfig& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Parse and validate; ConfigError on schema mismatch or invalid values.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

}  // namespace semfi
