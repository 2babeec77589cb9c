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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "semfi/config.hpp"
#include "semfi/denoiser.hpp"
#include "semfi/lora.hpp"
#include "semfi/text_encoder.hpp"
#include "semfi/video.hpp"

namespace semfi {

struct TrainingExample {
    VideoClip clip;
    TextEmbedding text;
};

enum class Conditioning {
    /// first and last frame (the interpolation task)
    dual_endpoint,
    /// first frame only, used to pretrain the base as an image-to-video model
    first_frame,
};

struct StepOptions {
    bool train_base = false;
    bool train_adapters = true;
    bool apply_adapters = true;
    Conditioning conditioning = Conditioning::dual_endpoint;
};

/// AdamW with per-parameter step counts, so experts that are routed rarely get
/// correct bias correction.
template <class T>
class AdamW {
public:
    explicit AdamW(double lr, double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    /// Updates exactly the parameters named in `grads`.
    void step(const std::map<std::string, Mat<T>*>& params, const ParamMap<T>& grads);

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    ParamMap<T> m_, v_;
    std::map<std::string, long> t_;
};

/// Names that receive gradients under `opts` for a batch of frame count n.
template <class T>
std::vector<std::string> trainable_names(const Denoiser<T>& model, const MoLStateT<T>* mol, const StepOptions& opts,
                                         int n);

/// Mean-squared denoising loss over a batch; fills `grads` when non-null.
/// Timesteps and noise come from `seed`, so repeated calls are identical.
template <class T>
double batch_loss(const Denoiser<T>& model, const MoLStateT<T>* mol, std::span<const TrainingExample> batch,
                  const StepOptions& opts, std::uint64_t seed, Gradients<T>* grads);

/// One optimizer step. Only trainable parameters change; returns the batch loss.
/// BatchError when the batch mixes frame counts.
template <class T>
double training_step(Denoiser<T>& model, MoLStateT<T>* mol, std::span<const TrainingExample> batch,
                     const StepOptions& opts, AdamW<T>& opt, std::uint64_t seed, double grad_clip = 0.0);

struct LossRecord {
    int step = 0;
    std::string phase;
    int frames = 0;
    double loss = 0.0;
};

using ProgressFn = std::function<void(const LossRecord&)>;

/// Runs the configured phases: staged mode pretrains the base on first-frame
/// conditioning, freezes it and trains the adapters; scratch mode trains base
/// and adapters jointly. Batches never mix frame counts.
std::vector<LossRecord> train(Denoiser<float>& model, MoLState& mol, const std::vector<TrainingExample>& data,
                              const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Mean of `window` trailing values at each position (shorter at the start).
std::vector<double> smoothed_losses(const std::vector<LossRecord>& log, int window);

}  // namespace semfi
