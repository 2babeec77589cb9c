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

#include "semfi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "semfi/errors.hpp"
#include "semfi/rng.hpp"

namespace semfi {

template <class T>
void AdamW<T>::step(const std::map<std::string, Mat<T>*>& params, const ParamMap<T>& grads) {
    for (const auto& [name, g] : grads) {
        const auto it = params.find(name);
        if (it == params.end()) throw ArgumentError("gradient for unknown parameter '" + name + "'");
        Mat<T>& w = *it->second;
        auto [mit, mnew] = m_.try_emplace(name);
        if (mnew) mit->second = Mat<T>::Zero(w.rows(), w.cols());
        auto [vit, vnew] = v_.try_emplace(name);
        if (vnew) vit->second = Mat<T>::Zero(w.rows(), w.cols());
        const long t = ++t_[name];
        Mat<T>& m = mit->second;
        Mat<T>& v = vit->second;
        m = static_cast<T>(beta1_) * m + static_cast<T>(1 - beta1_) * g;
        v = static_cast<T>(beta2_) * v + static_cast<T>(1 - beta2_) * g.cwiseProduct(g);
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
        const T step = static_cast<T>(lr_ / bc1);
        const T vscale = static_cast<T>(1.0 / bc2);
        if (wd_ > 0) w *= static_cast<T>(1.0 - lr_ * wd_);
        w.array() -= step * m.array() / ((v.array() * vscale).sqrt() + static_cast<T>(eps_));
    }
}

template <class T>
std::vector<std::string> trainable_names(const Denoiser<T>& model, const MoLStateT<T>* mol, const StepOptions& opts,
                                         int n) {
    std::vector<std::string> names;
    if (opts.train_base)
        for (const auto& [name, m] : model.params()) names.push_back(name);
    if (opts.train_adapters && opts.apply_adapters && mol) {
        auto extra = trainable_parameters(*mol, n);
        names.insert(names.end(), extra.begin(), extra.end());
    }
    return names;
}

template <class T>
double batch_loss(const Denoiser<T>& model, const MoLStateT<T>* mol, std::span<const TrainingExample> batch,
                  const StepOptions& opts, std::uint64_t seed, Gradients<T>* grads) {
    if (batch.empty()) throw ArgumentError("empty training batch");
    const int n = batch.front().clip.num_frames();
    for (const auto& ex : batch)
        if (ex.clip.num_frames() != n)
            throw BatchError("batch mixes frame counts " + std::to_string(n) + " and " +
                             std::to_string(ex.clip.num_frames()) + "; one expert is routed per batch");
    const auto& sched = model.schedule();
    const auto& codec = model.codec();
    const MoLStateT<T>* active = opts.apply_adapters ? mol : nullptr;
    Rng root = Rng(seed).split("batch");
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& ex = batch[i];
        Rng rng = root.split(static_cast<std::uint64_t>(i));
        const int t = static_cast<int>(rng.uniform_int(0, sched.steps() - 1));
        const Volume<float> lat = codec.encode(ex.clip.frames);
        Volume<T> x0(lat.frames, lat.height, lat.width, lat.channels);
        for (std::size_t k = 0; k < lat.size(); ++k) x0.data[k] = static_cast<T>(lat.data[k]);
        Volume<T> eps(x0.frames, x0.height, x0.width, x0.channels);
        for (auto& e : eps.data) e = static_cast<T>(rng.normal());
        Volume<T> xt(x0.frames, x0.height, x0.width, x0.channels);
        sched.template add_noise<T>(x0.data, eps.data, t, xt.data);

        const Image first = ex.clip.frame(0);
        const GuidancePack pack =
            opts.conditioning == Conditioning::dual_endpoint
                ? build_guidance_pack(first, ex.clip.frame(n - 1), n, codec, model.image_encoder())
                : build_first_frame_pack(first, n, codec, model.image_encoder());

        ForwardCache<T> cache;
        const Volume<T> pred = model.forward(xt, t, ex.text, pack, active, n, grads ? &cache : nullptr);

        Volume<T> target = eps;
        if (model.config().prediction_target == PredictionTarget::velocity)
            sched.template velocity<T>(x0.data, eps.data, t, target.data);

        const double numel = static_cast<double>(pred.size());
        double se = 0.0;
        Volume<T> dpred(pred.frames, pred.height, pred.width, pred.channels);
        const T gscale = static_cast<T>(2.0 / (numel * static_cast<double>(batch.size())));
        for (std::size_t k = 0; k < pred.size(); ++k) {
            const T diff = pred.data[k] - target.data[k];
            se += static_cast<double>(diff) * static_cast<double>(diff);
            dpred.data[k] = gscale * diff;
        }
        total += se / numel;
        if (grads) model.backward(dpred, cache, *grads);
    }
    return total / static_cast<double>(batch.size());
}

template <class T>
double training_step(Denoiser<T>& model, MoLStateT<T>* mol, std::span<const TrainingExample> batch,
                     const StepOptions& opts, AdamW<T>& opt, std::uint64_t seed, double grad_clip) {
    if (batch.empty()) throw ArgumentError("empty training batch");
    const int n = batch.front().clip.num_frames();
    const auto names = trainable_names(model, mol, opts, n);
    Gradients<T> grads(std::set<std::string>(names.begin(), names.end()));
    const double loss = batch_loss(model, mol, batch, opts, seed, &grads);
    if (!std::isfinite(loss)) throw Error("training loss is not finite");

    if (grad_clip > 0) {
        double sq = 0.0;
        for (const auto& [name, g] : grads.values()) sq += static_cast<double>(g.squaredNorm());
        const double norm = std::sqrt(sq);
        if (norm > grad_clip)
            for (auto& [name, g] : grads.values()) g *= static_cast<T>(grad_clip / norm);
    }

    std::map<std::string, Mat<T>*> params;
    for (const auto& name : names) {
        if (name.rfind("mol/", 0) == 0) params[name] = &mol->parameter(name);
        else params[name] = &model.params().at(name);
    }
    opt.step(params, grads.values());
    return loss;
}

namespace {

/// Per-scale shuffled queues; refilled from the seeded stream when exhausted.
class BatchSampler {
public:
    BatchSampler(const std::vector<TrainingExample>& data, const std::vector<int>& scales, std::uint64_t seed)
        : data_(data), rng_(Rng(seed).split("batches")) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            const int n = data[i].clip.num_frames();
            if (std::find(scales.begin(), scales.end(), n) != scales.end()) pools_[n].push_back(i);
        }
        for (const auto& [s, idx] : pools_) order_.push_back(s);
        if (order_.empty()) throw DataError("no training clips at the configured scales");
    }

    std::vector<TrainingExample> next(int batch_size) {
        if (cursor_ == 0) shuffle(order_);
        const int s = order_[cursor_];
        cursor_ = (cursor_ + 1) % order_.size();
        auto& queue = queues_[s];
        std::vector<TrainingExample> batch;
        while (static_cast<int>(batch.size()) < batch_size) {
            if (queue.empty()) {
                queue = pools_[s];
                shuffle(queue);
            }
            batch.push_back(data_[queue.back()]);
            queue.pop_back();
        }
        return batch;
    }

    std::size_t total() const { return data_.size(); }

private:
    template <class V>
    void shuffle(V& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }

    const std::vector<TrainingExample>& data_;
    Rng rng_;
    std::map<int, std::vector<std::size_t>> pools_;
    std::map<int, std::vector<std::size_t>> queues_;
    std::vector<int> order_;
    std::size_t cursor_ = 0;
};

}  // namespace

std::vector<LossRecord> train(Denoiser<float>& model, MoLState& mol, const std::vector<TrainingExample>& data,
                              const ExperimentConfig& cfg, const ProgressFn& progress) {
    const auto scales = cfg.training_scales();
    BatchSampler sampler(data, scales, cfg.train.seed);
    const Rng root = Rng(cfg.train.seed).split("train");
    int steps = cfg.train.steps;
    if (steps <= 0) {
        const int per_epoch = static_cast<int>((sampler.total() + cfg.train.batch_size - 1) / cfg.train.batch_size);
        steps = std::max(1, cfg.train.epochs * per_epoch);
    }

    struct Phase {
        std::string name;
        int steps;
        StepOptions opts;
        double lr;
    };
    std::vector<Phase> phases;
    if (cfg.train.mode == TrainMode::staged) {
        if (cfg.train.pretrain_steps > 0)
            phases.push_back({"pretrain", cfg.train.pretrain_steps, {true, false, false, Conditioning::first_frame},
                              cfg.train.pretrain_lr});
        phases.push_back({"mol", steps, {false, true, true, Conditioning::dual_endpoint}, cfg.train.lr});
    } else {
        phases.push_back({"joint", steps, {true, true, true, Conditioning::dual_endpoint}, cfg.train.lr});
    }

    std::vector<LossRecord> log;
    int global = 0;
    for (const auto& phase : phases) {
        AdamW<float> opt(phase.lr, cfg.train.weight_decay);
        for (int i = 0; i < phase.steps; ++i, ++global) {
            const auto batch = sampler.next(cfg.train.batch_size);
            const std::uint64_t step_seed = root.split(static_cast<std::uint64_t>(global)).key();
            const double loss =
                training_step<float>(model, &mol, batch, phase.opts, opt, step_seed, cfg.train.grad_clip);
            LossRecord rec{global, phase.name, batch.front().clip.num_frames(), loss};
            log.push_back(rec);
            if (progress && (cfg.train.log_every <= 1 || global % cfg.train.log_every == 0)) progress(rec);
        }
    }
    return log;
}

std::vector<double> smoothed_losses(const std::vector<LossRecord>& log, int window) {
    std::vector<double> out(log.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        acc += log[i].loss;
        if (i >= static_cast<std::size_t>(window)) acc -= log[i - window].loss;
        out[i] = acc / static_cast<double>(std::min<std::size_t>(i + 1, window));
    }
    return out;
}

template class AdamW<float>;
template class AdamW<double>;
template std::vector<std::string> trainable_names<float>(const Denoiser<float>&, const MoLStateT<float>*, const StepOptions&, int);
template std::vector<std::string> trainable_names<double>(const Denoiser<double>&, const MoLStateT<double>*, const StepOptions&, int);
template double batch_loss<float>(const Denoiser<float>&, const MoLStateT<float>*, std::span<const TrainingExample>,
                                  const StepOptions&, std::uint64_t, Gradients<float>*);
template double batch_loss<double>(const Denoiser<double>&, const MoLStateT<double>*, std::span<const TrainingExample>,
                                   const StepOptions&, std::uint64_t, Gradients<double>*);
template double training_step<float>(Denoiser<float>&, MoLStateT<float>*, std::span<const TrainingExample>,
                                     const StepOptions&, AdamW<float>&, std::uint64_t, double);
template double training_step<double>(Denoiser<double>&, MoLStateT<double>*, std::span<const TrainingExample>,
                                      const StepOptions&, AdamW<double>&, std::uint64_t, double);

}  // namespace semfi
