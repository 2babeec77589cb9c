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

#include "semfi/config.hpp"

#include <algorithm>
#include <fstream>

#include "semfi/errors.hpp"

namespace semfi {

using nlohmann::json;

namespace {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config field '") + key + "': " + e.what());
        }
    }
}

std::string to_string(PredictionTarget p) { return p == PredictionTarget::epsilon ? "epsilon" : "velocity"; }
std::string to_string(TrainMode m) { return m == TrainMode::staged ? "staged" : "scratch"; }
std::string to_string(ThresholdMode m) { return m == ThresholdMode::percentile ? "percentile" : "absolute"; }

bool strictly_increasing(const std::vector<int>& v) {
    return std::adjacent_find(v.begin(), v.end(), [](int a, int b) { return a >= b; }) == v.end();
}

}  // namespace

void DenoiserConfig::validate() const {
    if (latent_pool != 1 && latent_pool != 2) throw ConfigError("model.latent_pool must be 1 or 2");
    if (image_height % latent_pool != 0) throw ConfigError("model.image_height not divisible by latent_pool");
    if (image_width % latent_pool != 0) throw ConfigError("model.image_width not divisible by latent_pool");
    if (patch.t < 1 || patch.h < 1 || patch.w < 1) throw ConfigError("model.patch dims must be positive");
    if (latent_height() % patch.h != 0) throw ConfigError("model.patch.h does not divide the latent height");
    if (latent_width() % patch.w != 0) throw ConfigError("model.patch.w does not divide the latent width");
    if (embed_dim <= 0 || num_heads <= 0 || embed_dim % num_heads != 0)
        throw ConfigError("model.embed_dim must be divisible by model.num_heads");
    if (num_layers < 0) throw ConfigError("model.num_layers must be non-negative");
    if (d_text <= 0 || max_text_tokens <= 0 || text_buckets <= 0) throw ConfigError("model text settings must be positive");
    if (max_frames < 81) throw ConfigError("model.max_frames must be >= 81");
    if (noise_steps < 2) throw ConfigError("model.noise_steps must be >= 2");
    if (!(beta_start > 0 && beta_end > beta_start && beta_end < 1)) throw ConfigError("model.beta range invalid");
    if (channels <= 0) throw ConfigError("model.channels must be positive");
}

void MoLConfig::validate() const {
    if (rank < 1) throw ConfigError("mol.rank must be >= 1");
    if (scales.empty()) throw ConfigError("mol.scales must be non-empty");
    if (!strictly_increasing(scales)) throw ConfigError("mol.scales must be strictly increasing");
}

std::vector<int> ExperimentConfig::training_scales() const {
    if (!mol.multi_frame_training) return {mol.single_scale};
    return data.scales;
}

void ExperimentConfig::validate() const {
    if (schema != kExperimentSchema) throw ConfigError("unsupported config schema '" + schema + "'");
    model.validate();
    mol.validate();
    if (data.scales.empty() || !strictly_increasing(data.scales)) throw ConfigError("data.scales must be strictly increasing");
    if (data.f_max < 2) throw ConfigError("data.f_max must be >= 2");
    if (data.height != model.image_height || data.width != model.image_width || data.channels != model.channels)
        throw ConfigError("data frame dims must match model.image_* and model.channels");
    if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (data.thresholds.mode == ThresholdMode::percentile &&
        !(data.thresholds.pct_low < data.thresholds.pct_high))
        throw ConfigError("data.thresholds percentiles must satisfy low < high");
    if (data.thresholds.mode == ThresholdMode::absolute &&
        !(data.thresholds.clip_low < data.thresholds.clip_high && data.thresholds.flow_low < data.thresholds.flow_high))
        throw ConfigError("data.thresholds must satisfy low < high");
    if (data.storage != "uint8" && data.storage != "float32") throw ConfigError("data.storage must be uint8 or float32");
    if (data.flow_estimator != "pyramid_lk" && data.flow_estimator != "ground_truth")
        throw ConfigError("data.flow_estimator must be pyramid_lk or ground_truth");
    if (bench.interpolator != "average" && bench.interpolator != "flow_warp")
        throw ConfigError("bench.interpolator must be average or flow_warp");
}

void to_json(json& j, const PatchSize& p) { j = json::array({p.t, p.h, p.w}); }

void from_json(const json& j, PatchSize& p) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("patch must be [t, h, w]");
    p.t = j[0].get<int>();
    p.h = j[1].get<int>();
    p.w = j[2].get<int>();
}

void to_json(json& j, const DenoiserConfig& c) {
    j = json{{"image_height", c.image_height}, {"image_width", c.image_width}, {"channels", c.channels},
             {"latent_pool", c.latent_pool}, {"patch", c.patch}, {"embed_dim", c.embed_dim},
             {"num_layers", c.num_layers}, {"num_heads", c.num_heads}, {"ff_mult", c.ff_mult},
             {"d_text", c.d_text}, {"max_text_tokens", c.max_text_tokens}, {"text_buckets", c.text_buckets},
             {"max_frames", c.max_frames}, {"noise_steps", c.noise_steps}, {"beta_start", c.beta_start},
             {"beta_end", c.beta_end}, {"prediction_target", to_string(c.prediction_target)},
             {"encoder_seed", c.encoder_seed}};
}

void from_json(const json& j, DenoiserConfig& c) {
    read_opt(j, "image_height", c.image_height);
    read_opt(j, "image_width", c.image_width);
    read_opt(j, "channels", c.channels);
    read_opt(j, "latent_pool", c.latent_pool);
    if (j.contains("patch")) from_json(j.at("patch"), c.patch);
    read_opt(j, "embed_dim", c.embed_dim);
    read_opt(j, "num_layers", c.num_layers);
    read_opt(j, "num_heads", c.num_heads);
    read_opt(j, "ff_mult", c.ff_mult);
    read_opt(j, "d_text", c.d_text);
    read_opt(j, "max_text_tokens", c.max_text_tokens);
    read_opt(j, "text_buckets", c.text_buckets);
    read_opt(j, "max_frames", c.max_frames);
    read_opt(j, "noise_steps", c.noise_steps);
    read_opt(j, "beta_start", c.beta_start);
    read_opt(j, "beta_end", c.beta_end);
    read_opt(j, "encoder_seed", c.encoder_seed);
    if (j.contains("prediction_target")) {
        const auto s = j.at("prediction_target").get<std::string>();
        if (s == "epsilon") c.prediction_target = PredictionTarget::epsilon;
        else if (s == "velocity") c.prediction_target = PredictionTarget::velocity;
        else throw ConfigError("model.prediction_target must be epsilon or velocity");
    }
}

void to_json(json& j, const MoLConfig& c) {
    j = json{{"rank", c.rank}, {"alpha", c.alpha}, {"scales", c.scales}, {"enabled", c.enabled},
             {"multi_frame_training", c.multi_frame_training}, {"single_scale", c.single_scale}};
}

void from_json(const json& j, MoLConfig& c) {
    read_opt(j, "rank", c.rank);
    read_opt(j, "alpha", c.alpha);
    read_opt(j, "scales", c.scales);
    read_opt(j, "enabled", c.enabled);
    read_opt(j, "multi_frame_training", c.multi_frame_training);
    read_opt(j, "single_scale", c.single_scale);
}

void to_json(json& j, const ThresholdConfig& c) {
    j = json{{"mode", to_string(c.mode)}, {"pct_low", c.pct_low}, {"pct_high", c.pct_high},
             {"clip_low", c.clip_low}, {"clip_high", c.clip_high}, {"flow_low", c.flow_low},
             {"flow_high", c.flow_high}};
}

void from_json(const json& j, ThresholdConfig& c) {
    if (j.contains("mode")) {
        const auto s = j.at("mode").get<std::string>();
        if (s == "percentile") c.mode = ThresholdMode::percentile;
        else if (s == "absolute") c.mode = ThresholdMode::absolute;
        else throw ConfigError("data.thresholds.mode must be percentile or absolute");
    }
    read_opt(j, "pct_low", c.pct_low);
    read_opt(j, "pct_high", c.pct_high);
    read_opt(j, "clip_low", c.clip_low);
    read_opt(j, "clip_high", c.clip_high);
    read_opt(j, "flow_low", c.flow_low);
    read_opt(j, "flow_high", c.flow_high);
}

void to_json(json& j, const DataConfig& c) {
    j = json{{"num_videos", c.num_videos}, {"height", c.height}, {"width", c.width}, {"channels", c.channels},
             {"fps_choices", c.fps_choices}, {"f_max", c.f_max}, {"max_shapes", c.max_shapes},
             {"motion_amplitude", c.motion_amplitude}, {"scales", c.scales}, {"feature_size", c.feature_size},
             {"flow_estimator", c.flow_estimator}, {"thresholds", c.thresholds}, {"test_videos", c.test_videos},
             {"storage", c.storage}, {"captioner", c.captioner}, {"captioner_endpoint", c.captioner_endpoint},
             {"seed", c.seed}};
}

void from_json(const json& j, DataConfig& c) {
    read_opt(j, "num_videos", c.num_videos);
    read_opt(j, "height", c.height);
    read_opt(j, "width", c.width);
    read_opt(j, "channels", c.channels);
    read_opt(j, "fps_choices", c.fps_choices);
    read_opt(j, "f_max", c.f_max);
    read_opt(j, "max_shapes", c.max_shapes);
    read_opt(j, "motion_amplitude", c.motion_amplitude);
    read_opt(j, "scales", c.scales);
    read_opt(j, "feature_size", c.feature_size);
    read_opt(j, "flow_estimator", c.flow_estimator);
    if (j.contains("thresholds")) from_json(j.at("thresholds"), c.thresholds);
    read_opt(j, "test_videos", c.test_videos);
    read_opt(j, "storage", c.storage);
    read_opt(j, "captioner", c.captioner);
    read_opt(j, "captioner_endpoint", c.captioner_endpoint);
    read_opt(j, "seed", c.seed);
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"mode", to_string(c.mode)}, {"epochs", c.epochs}, {"steps", c.steps},
             {"pretrain_steps", c.pretrain_steps}, {"batch_size", c.batch_size}, {"lr", c.lr},
             {"pretrain_lr", c.pretrain_lr}, {"weight_decay", c.weight_decay}, {"grad_clip", c.grad_clip},
             {"seed", c.seed}, {"log_every", c.log_every}};
}

void from_json(const json& j, TrainConfig& c) {
    if (j.contains("mode")) {
        const auto s = j.at("mode").get<std::string>();
        if (s == "staged") c.mode = TrainMode::staged;
        else if (s == "scratch") c.mode = TrainMode::scratch;
        else throw ConfigError("train.mode must be staged or scratch");
    }
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "steps", c.steps);
    read_opt(j, "pretrain_steps", c.pretrain_steps);
    read_opt(j, "batch_size", c.batch_size);
    read_opt(j, "lr", c.lr);
    read_opt(j, "pretrain_lr", c.pretrain_lr);
    read_opt(j, "weight_decay", c.weight_decay);
    read_opt(j, "grad_clip", c.grad_clip);
    read_opt(j, "seed", c.seed);
    read_opt(j, "log_every", c.log_every);
}

void to_json(json& j, const BenchConfig& c) {
    j = json{{"sample_steps", c.sample_steps}, {"clamp_endpoints", c.clamp_endpoints},
             {"unclamped_frame_fidelity", c.unclamped_frame_fidelity}, {"cfg_scale", c.cfg_scale},
             {"seed", c.seed}, {"embedder_seed", c.embedder_seed}, {"interpolator", c.interpolator},
             {"flow_estimator", c.flow_estimator}, {"probe_clips", c.probe_clips}};
}

void from_json(const json& j, BenchConfig& c) {
    read_opt(j, "sample_steps", c.sample_steps);
    read_opt(j, "clamp_endpoints", c.clamp_endpoints);
    read_opt(j, "unclamped_frame_fidelity", c.unclamped_frame_fidelity);
    read_opt(j, "cfg_scale", c.cfg_scale);
    read_opt(j, "seed", c.seed);
    read_opt(j, "embedder_seed", c.embedder_seed);
    read_opt(j, "interpolator", c.interpolator);
    read_opt(j, "flow_estimator", c.flow_estimator);
    read_opt(j, "probe_clips", c.probe_clips);
}

void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"schema", c.schema}, {"model", c.model}, {"mol", c.mol}, {"data", c.data},
             {"train", c.train}, {"bench", c.bench}};
}

void from_json(const json& j, ExperimentConfig& c) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    if (!j.contains("schema")) throw ConfigError("config is missing the 'schema' field");
    c.schema = j.at("schema").get<std::string>();
    if (j.contains("model")) from_json(j.at("model"), c.model);
    if (j.contains("mol")) from_json(j.at("mol"), c.mol);
    if (j.contains("data")) from_json(j.at("data"), c.data);
    if (j.contains("train")) from_json(j.at("train"), c.train);
    if (j.contains("bench")) from_json(j.at("bench"), c.bench);
}

namespace {

// Every key in `given` must exist in `known`, recursively through objects.
void reject_unknown_keys(const json& given, const json& known, const std::string& path) {
    if (!given.is_object() || !known.is_object()) return;
    for (const auto& [key, value] : given.items()) {
        const std::string where = path.empty() ? key : path + "." + key;
        auto it = known.find(key);
        if (it == known.end()) throw ConfigError("unknown config field '" + where + "'");
        reject_unknown_keys(value, *it, where);
    }
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig c;
    try {
        from_json(j, c);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    reject_unknown_keys(j, json(c), "");
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_experiment_config(j);
}

}  // namespace semfi
