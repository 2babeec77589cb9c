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

// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   semfi_acceptance [--only 1,2,...] [--work DIR] [--config reference.json]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semfi/bench.hpp"
#include "semfi/checkpoint.hpp"
#include "semfi/clip_io.hpp"
#include "semfi/conditioning.hpp"
#include "semfi/denoiser.hpp"
#include "semfi/harness.hpp"
#include "semfi/hash.hpp"
#include "semfi/lora.hpp"
#include "semfi/metrics.hpp"
#include "semfi/pipeline.hpp"
#include "semfi/trainer.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace semfi;
using semfi::testing::micro_config;
using semfi::testing::random_clip;
using semfi::testing::random_image;
using semfi::testing::tiny_experiment;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path g_work;
fs::path g_config;

fs::path fresh_dir(const std::string& name) {
    const fs::path p = g_work / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

template <class T>
std::string adapter_checksum(const LoraAdapterT<T>& ad) {
    std::string bytes;
    for (const auto& [name, f] : ad.layers) {
        bytes += name;
        bytes.append(reinterpret_cast<const char*>(f.a.data()), sizeof(T) * f.a.size());
        bytes.append(reinterpret_cast<const char*>(f.b.data()), sizeof(T) * f.b.size());
    }
    return git_blob_hash(bytes);
}

std::string base_checksum(const ParamMap<float>& p) {
    std::string bytes;
    for (const auto& [name, m] : p) {
        bytes += name;
        bytes.append(reinterpret_cast<const char*>(m.data()), sizeof(float) * m.size());
    }
    return git_blob_hash(bytes);
}

const std::vector<int> kScales{5, 9, 17, 33, 65, 81};

// 1 -------------------------------------------------------------------------
Outcome routing_oracle() {
    const auto t0 = Clock::now();
    int mismatches = 0;
    for (int n = 2; n <= 200; ++n) {
        int best = kScales.front();
        for (int s : kScales)
            if (std::abs(n - s) < std::abs(n - best) || (std::abs(n - s) == std::abs(n - best) && s < best)) best = s;
        mismatches += route(n, kScales) != best ? 1 : 0;
    }
    const double t = seconds_since(t0);
    return {mismatches == 0 && t < 1.0, fmt("%d mismatches over N in [2,200], %.4f s", mismatches, t)};
}

// 2 -------------------------------------------------------------------------
Outcome merge_equivalence() {
    Rng rng(2024);
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        const int d_in = static_cast<int>(rng.uniform_int(2, 64));
        const int d_out = static_cast<int>(rng.uniform_int(2, 64));
        const int rank = static_cast<int>(rng.uniform_int(1, std::min({d_in, d_out, 16})));
        const std::vector<LayerShape> layer{{"w", d_in, d_out}};
        auto u = init_adapter<float>(layer, rank, rank * rng.uniform(0.5, 2.0), rng.next_u64());
        auto e = init_adapter<float>(layer, rank, rank * rng.uniform(0.5, 2.0), rng.next_u64());
        for (auto* ad : {&u, &e})
            for (int i = 0; i < ad->layers.at("w").b.size(); ++i)
                ad->layers.at("w").b.data()[i] = static_cast<float>(rng.normal());
        Mat<float> w(d_out, d_in);
        for (int i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(rng.normal());
        ColVec<float> x(d_in);
        for (int i = 0; i < d_in; ++i) x[i] = static_cast<float>(rng.normal());
        const Mat<float> delta = u.delta("w") + e.delta("w");
        const LoraAdapterT<float>* ads[] = {&u, &e};
        const ColVec<float> merged = apply_lora<float>(w, delta, x);
        const ColVec<float> unmerged = apply_lora_unmerged<float>(w, ads, "w", x);
        worst = std::max(worst, static_cast<double>((merged - unmerged).cwiseAbs().maxCoeff() /
                                                    unmerged.cwiseAbs().maxCoeff()));
    }

    // whole-model check: merged weights vs the live two-adapter path
    const auto cfg = micro_config();
    Denoiser<float> model(cfg, 3);
    MoLConfig mc;
    mc.rank = 2;
    auto mol = init_mol<float>(model.lora_layers(), mc, 4);
    for (const auto& name : mol.parameter_names()) {
        auto& m = mol.parameter(name);
        for (int i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(0.3 * rng.normal());
    }
    const auto clip = random_clip(20, 8, 8, 2, 5);
    const auto pack = build_guidance_pack(clip.frame(0), clip.frame(19), 20, model.codec(), model.image_encoder());
    const auto noisy = model.codec().encode(clip.frames);
    const auto text = model.text_encoder().encode("a red circle");
    const auto live = model.forward(noisy, 17, text, pack, &mol, 20);
    const auto merged = model.merged(mol, 20).forward(noisy, 17, text, pack, nullptr, 20);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < live.size(); ++i) {
        num = std::max(num, static_cast<double>(std::abs(live.data[i] - merged.data[i])));
        den = std::max(den, static_cast<double>(std::abs(live.data[i])));
    }
    const double model_err = num / den;
    return {worst < 1e-5 && model_err < 1e-5,
            fmt("worst layer rel err %.2e over 100 draws, whole-model rel err %.2e", worst, model_err)};
}

// 3 -------------------------------------------------------------------------
Outcome neutrality_and_isolation() {
    const auto cfg = micro_config();
    Denoiser<float> model(cfg, 10);
    MoLConfig mc;
    mc.rank = 2;
    const MoLState fresh = init_mol<float>(model.lora_layers(), mc, 11);

    bool identical = true;
    for (int n : {2, 5, 20, 81}) {
        const auto clip = random_clip(n, 8, 8, 2, 12 + n);
        const auto pack =
            build_guidance_pack(clip.frame(0), clip.frame(n - 1), n, model.codec(), model.image_encoder());
        const auto x = model.codec().encode(clip.frames);
        const auto text = model.text_encoder().encode("blue square");
        identical = identical && model.forward(x, 30, text, pack, &fresh, n).data ==
                                     model.forward(x, 30, text, pack, nullptr, n).data;
    }

    int violations = 0;
    for (int n : {5, 9, 17, 33, 65, 81, 20, 70}) {
        Denoiser<float> m = model;
        MoLState mol = fresh;
        const std::string base_before = base_checksum(m.params());
        std::map<int, std::string> before;
        for (const auto& [s, ad] : mol.experts) before[s] = adapter_checksum(ad);
        const std::string uni_before = adapter_checksum(mol.universal);

        std::vector<TrainingExample> batch;
        for (int i = 0; i < 2; ++i) batch.push_back({random_clip(n, 8, 8, 2, 40 + i), m.text_encoder().encode("x")});
        AdamW<float> opt(1e-2);
        training_step<float>(m, &mol, batch, StepOptions{}, opt, 7, 1.0);

        const int routed = route(n, kScales);
        violations += base_checksum(m.params()) != base_before ? 1 : 0;
        violations += adapter_checksum(mol.universal) == uni_before ? 1 : 0;
        for (const auto& [s, ad] : mol.experts) {
            const bool changed = adapter_checksum(ad) != before[s];
            violations += changed != (s == routed) ? 1 : 0;
        }
    }
    return {identical && violations == 0,
            fmt("fresh adapters bit-identical: %s; checksum violations over 8 batches: %d", identical ? "yes" : "no",
                violations)};
}

// 4 -------------------------------------------------------------------------
Outcome conditioning_invariants() {
    const LatentCodec codec(2);
    const RandomProjectionEncoder enc(16, 3);
    const Image f = random_image(16, 16, 3, 1), l = random_image(16, 16, 3, 2);
    int bad = 0;
    for (int n = 2; n <= 81; ++n) {
        const auto mask = build_mask(n);
        int ones = 0;
        for (float v : mask) ones += v == 1.0f ? 1 : 0;
        bad += (ones != 2 || mask.front() != 1.0f || mask.back() != 1.0f) ? 1 : 0;
        for (int i = 1; i + 1 < n; ++i) bad += mask[i] != 0.0f ? 1 : 0;
        const auto g = build_guidance_frames(f, l, n, codec);
        for (int i = 1; i + 1 < n; ++i)
            for (float v : g.frame(i)) bad += v != 0.0f ? 1 : 0;
    }
    const bool commutes = condition_embedding(f, l, enc) == condition_embedding(l, f, enc);
    return {bad == 0 && commutes, fmt("%d mask/guidance violations for N in [2,81]; embedding sum commutes: %s", bad,
                                      commutes ? "yes" : "no")};
}

// 5 -------------------------------------------------------------------------
Outcome cutting() {
    VideoClip source{Volume<float>(324, 2, 2, 1), 24, ""};
    for (int i = 0; i < 324; ++i)
        for (auto& v : source.frames.frame(i)) v = static_cast<float>(i) / 1024.0f;
    int bad = 0, cuts = 0;
    for (int f = 81; f <= 324; ++f) {
        const VideoClip video = cut(source, 0, f);
        const auto plans = plan_cuts(f, kScales);
        bad += plans.size() != kScales.size() ? 1 : 0;
        for (const auto& p : plans) {
            const VideoClip c = cut(video, p.start, p.scale);
            ++cuts;
            bad += c.num_frames() != p.scale ? 1 : 0;
            const auto a = c.frames.frame(0), b = c.frames.frame(p.scale - 1);
            const auto sa = video.frames.frame(p.start), sb = video.frames.frame(p.start + p.scale - 1);
            bad += std::memcmp(a.data(), sa.data(), a.size_bytes()) != 0 ? 1 : 0;
            bad += std::memcmp(b.data(), sb.data(), b.size_bytes()) != 0 ? 1 : 0;
            const double offset = (p.start + (p.scale - 1) / 2.0) - (f - 1) / 2.0;
            bad += std::abs(offset) > 1.0 ? 1 : 0;
        }
    }
    return {bad == 0, fmt("%d violations over %d cuts (f in [81,324], all s)", bad, cuts)};
}

// 6 -------------------------------------------------------------------------
Outcome metric_identities() {
    std::vector<std::string> failures;
    const auto check = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };
    const RandomConvEmbedder emb(11);
    const VideoClip a = random_clip(9, 32, 32, 3, 1);
    check(perceptual_distance(a, a, emb) == 0.0, "perceptual");
    check(std::abs(frechet_feature_distance(frames_of(a), frames_of(a), emb)) < 1e-6, "frechet(identical)");
    check(mean_abs_diff(a.frame(3), a.frame(3)) == 0.0, "mae");
    const auto ff = frame_fidelity(a, a.frame(0), a.frame(8), emb);
    check(ff.perceptual_mean() == 0.0 && ff.psnr_mean() == kPsnrCap, "frame fidelity");

    VideoClip still{Volume<float>(7, 32, 32, 3), 24, ""};
    for (int i = 0; i < 7; ++i) still.set_frame(i, a.frame(0));
    check(temporal_flickering(still) == 1.0, "temporal_flickering(static)");
    check(dynamic_degree(still, PyramidLucasKanade{}) == 0.0, "dynamic_degree(static)");

    Rng rng(6);
    Eigen::MatrixXd x(300, 6);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    Eigen::RowVectorXd shift(6);
    for (int i = 0; i < 6; ++i) shift[i] = rng.normal();
    const double fd = frechet_distance(x, x.rowwise() + shift);
    check(std::abs(fd - shift.squaredNorm()) < 1e-4, "frechet(equal covariance)");

    Image base(64, 64, 3, 0.5f), noisy = base;
    for (auto& v : noisy.data) v += static_cast<float>(0.1 * rng.normal());
    const double p = psnr(base, noisy);
    check(std::abs(p - 20.0) <= 0.2, "psnr(sigma=0.1)");

    std::string detail = fmt("FD gap %.2e, PSNR %.3f dB", std::abs(fd - shift.squaredNorm()), p);
    for (const auto& f : failures) detail += "; failed " + f;
    return {failures.empty(), detail};
}

// 7 -------------------------------------------------------------------------
Outcome gradient_check() {
    const auto t0 = Clock::now();
    const auto cfg = micro_config();
    Denoiser<double> model(cfg, 21);
    MoLConfig mc;
    mc.rank = 2;
    mc.scales = {5, 9};
    auto mol = init_mol<double>(model.lora_layers(), mc, 22);
    Rng rng(23);
    for (const auto& name : mol.parameter_names()) {
        auto& m = mol.parameter(name);
        if (name.back() == 'B')
            for (int i = 0; i < m.size(); ++i) m.data()[i] = 0.2 * rng.normal();
    }
    std::vector<TrainingExample> batch;
    for (int i = 0; i < 2; ++i) batch.push_back({random_clip(7, 8, 8, 2, 30 + i), model.text_encoder().encode("red")});
    const StepOptions opts;
    const auto names = trainable_names(model, &mol, opts, 7);
    Gradients<double> grads(std::set<std::string>(names.begin(), names.end()));
    batch_loss<double>(model, &mol, batch, opts, 99, &grads);

    int checked = 0, failed = 0;
    double worst = 0.0;
    for (const auto& name : names) {
        Mat<double>& w = mol.parameter(name);
        const Mat<double>& g = grads.values().at(name);
        for (int k = 0; k < 3; ++k) {
            const auto idx = static_cast<Eigen::Index>(rng.uniform_int(0, w.size() - 1));
            const double orig = w.data()[idx], h = 1e-5;
            w.data()[idx] = orig + h;
            const double up = batch_loss<double>(model, &mol, batch, opts, 99, nullptr);
            w.data()[idx] = orig - h;
            const double down = batch_loss<double>(model, &mol, batch, opts, 99, nullptr);
            w.data()[idx] = orig;
            const double num = (up - down) / (2 * h), an = g.data()[idx];
            if (std::abs(num) < 1e-9 && std::abs(an) < 1e-9) continue;
            const double rel = std::abs(an - num) / std::max({std::abs(an), std::abs(num), 1e-6});
            worst = std::max(worst, rel);
            ++checked;
            failed += rel > 1e-3 ? 1 : 0;
        }
    }
    const double t = seconds_since(t0);
    return {failed == 0 && checked > 50 && t < 120.0,
            fmt("%d adapter entries checked, %d over rtol 1e-3, worst %.2e, %.1f s", checked, failed, worst, t)};
}

// 8 -------------------------------------------------------------------------
double endpoint_psnr(const ClipGenerator& gen, const Manifest& testset, const fs::path& dir,
                     const ExperimentConfig& cfg, int* clips) {
    BenchOptions o{cfg.bench, cfg.data, cfg.data.scales};
    o.bench.clamp_endpoints = false;
    o.bench.unclamped_frame_fidelity = true;
    const BenchReport r = bench_run(gen, testset, dir, o);
    *clips = static_cast<int>(r.clips.size()) - r.failed;
    return r.all.at("frame_psnr").value;
}

Outcome desk_training() {
    const auto t0 = Clock::now();
    const ExperimentConfig cfg = load_experiment_config(g_config.string());
    const fs::path data = fresh_dir("c8_data");
    cmd_data(cfg.data, "all", data);
    const TrainResult tr = cmd_train(cfg, data, g_work / "c8_train", [](const LossRecord& r) {
        if (r.step % 250 == 0) std::fprintf(stderr, "  step %d [%s] loss %.4f\n", r.step, r.phase.c_str(), r.loss);
    });
    const double ratio = tr.summary.ratio();

    const Manifest testset = Manifest::load(data / "test");
    const Rng root(cfg.train.seed);
    const Denoiser<float> untrained(cfg.model, root.split("model").key());
    const MoLState untrained_mol = init_mol<float>(untrained.lora_layers(), cfg.mol, root.split("mol").key());
    int n_base = 0, n_trained = 0;
    const double base = endpoint_psnr(ModelGenerator(untrained, &untrained_mol, cfg.bench.sample_steps, 1.0),
                                      testset, data / "test", cfg, &n_base);
    const Checkpoint ck = load_checkpoint(tr.checkpoint);
    const Denoiser<float> trained = ck.denoiser();
    const double after = endpoint_psnr(ModelGenerator(trained, &*ck.mol, cfg.bench.sample_steps, 1.0), testset,
                                       data / "test", cfg, &n_trained);
    const double hours = seconds_since(t0) / 3600.0;
    const bool ok = ratio < 0.6 && after - base >= 5.0 && n_base == 120 && n_trained == 120 && hours < 8.0;
    return {ok, fmt("%zu steps, smoothed loss %.4f -> %.4f (ratio %.3f); unclamped endpoint PSNR %.2f -> %.2f dB "
                    "(+%.2f) over %d clips; %.2f h",
                    tr.log.size(), tr.summary.initial, tr.summary.final, ratio, base, after, after - base, n_trained,
                    hours)};
}

// 9 -------------------------------------------------------------------------
Outcome ablation_harness() {
    const ExperimentConfig cfg = tiny_experiment();
    const fs::path out = fresh_dir("c9_ablate");
    const AblationResult res = cmd_ablate(cfg, out / "data", out);
    std::vector<std::string> problems;
    const std::vector<std::string> labels{"w/o Multi-frame", "w/o MoL", "Full Model"};
    if (res.rows.size() != 3) problems.push_back("row count");
    for (std::size_t i = 0; i < res.rows.size() && i < 3; ++i) {
        if (res.rows[i].label != labels[i]) problems.push_back("label " + res.rows[i].label);
        if (!res.rows[i].ok) problems.push_back(res.rows[i].label + " failed: " + res.rows[i].error);
    }
    // every variant's training run recorded the same manifest checksum
    std::set<std::string> sums;
    for (const char* d : {"wo_multi_frame", "wo_mol", "full"}) {
        std::ifstream in(out / d / "run.json");
        if (!in) {
            problems.push_back(std::string("missing run.json for ") + d);
            continue;
        }
        sums.insert(nlohmann::json::parse(in)["extra"]["manifest_checksum"].get<std::string>());
    }
    if (sums.size() != 1 || *sums.begin() != res.data_checksum) problems.push_back("data checksums differ");

    std::ifstream md_in(out / "ablation.md");
    std::stringstream md;
    md << md_in.rdbuf();
    const std::string text = md.str();
    for (const auto& l : labels)
        if (text.find("| " + l + " |") == std::string::npos) problems.push_back("markdown row " + l);
    if (text.find("Log10-transformed variance") == std::string::npos) problems.push_back("variance block");
    const std::string header = "| Setting | LPIPS*↓ | FID*↓ | Semantic Fidelity*↑ | TF↑ | MS↑ | DD↑ | AQ↑ | IQ↑ |";
    if (text.find(header) == std::string::npos) problems.push_back("column order");

    const auto variants = ablation_variants(cfg);
    if (config_diff(cfg, variants[0].second) != std::vector<std::string>{"data.scales"} ||
        config_diff(cfg, variants[1].second) != std::vector<std::string>{"mol.enabled"} ||
        !config_diff(cfg, variants[2].second).empty())
        problems.push_back("variant config diffs");

    std::string detail = "rows: w/o Multi-frame | w/o MoL | Full Model; data checksum " + res.data_checksum.substr(0, 12);
    for (const auto& p : problems) detail += "; " + p;
    return {problems.empty(), detail};
}

// 10 ------------------------------------------------------------------------
Outcome reproducibility() {
    ExperimentConfig cfg = tiny_experiment();
    cfg.train.pretrain_steps = 6;
    cfg.train.steps = 6;
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* name : {"c10_run_a", "c10_run_b"}) {
        const fs::path root = fresh_dir(name);
        cmd_data(cfg.data, "all", root / "data");
        const auto tr = cmd_train(cfg, root / "data", root / "train");
        cmd_bench(cfg, tr.checkpoint, root / "data" / "test", root / "bench");
        std::map<std::string, std::string> h;
        for (const fs::path rel : {fs::path("data/manifest.jsonl"), fs::path("data/test/manifest.jsonl"),
                                   fs::path("data/retained.jsonl"), fs::path("train/checkpoint.ckpt"),
                                   fs::path("train/loss.csv"), fs::path("bench/report.csv"),
                                   fs::path("bench/per_clip.csv"), fs::path("bench/report.md")})
            h[rel.string()] = hash_file(root / rel);
        runs.push_back(h);
    }
    std::string diff;
    for (const auto& [k, v] : runs[0])
        if (runs[1].at(k) != v) diff += " " + k;
    return {diff.empty(), diff.empty() ? fmt("%zu artifacts byte-identical across two runs", runs[0].size())
                                       : "differs:" + diff};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    g_work = fs::temp_directory_path() / "semfi_acceptance";
    g_config = SEMFI_REFERENCE_CONFIG;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string part;
            while (std::getline(ss, part, ',')) only.insert(std::stoi(part));
        } else if (a == "--work" && i + 1 < argc) {
            g_work = argv[++i];
        } else if (a == "--config" && i + 1 < argc) {
            g_config = argv[++i];
        } else {
            std::fprintf(stderr, "usage: %s [--only 1,2,...] [--work DIR] [--config FILE]\n", argv[0]);
            return 2;
        }
    }
    fs::create_directories(g_work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"routing oracle equivalence", routing_oracle},
        {"merged vs unmerged adapters", merge_equivalence},
        {"LoRA neutrality and gradient isolation", neutrality_and_isolation},
        {"conditioning invariants", conditioning_invariants},
        {"multi-scale cutting", cutting},
        {"metric identities", metric_identities},
        {"adapter gradient check", gradient_check},
        {"desk-scale training target", desk_training},
        {"ablation harness", ablation_harness},
        {"end-to-end reproducibility", reproducibility},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
