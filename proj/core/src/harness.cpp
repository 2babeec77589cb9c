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

#include "semfi/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "semfi/checkpoint.hpp"
#include "semfi/clip_io.hpp"
#include "semfi/errors.hpp"
#include "semfi/hash.hpp"
#include "semfi/lora.hpp"
#include "semfi/pipeline.hpp"
#include "semfi/rng.hpp"
#include "semfi/sampler.hpp"

namespace fs = std::filesystem;

namespace semfi {

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string canonical_config(const ExperimentConfig& cfg) {
    nlohmann::json j = cfg;
    return j.dump(2) + "\n";
}

fs::path manifest_file(const fs::path& p) { return fs::is_directory(p) ? p / "manifest.jsonl" : p; }

fs::path manifest_dir(const fs::path& p) { return fs::is_directory(p) ? p : p.parent_path(); }

}  // namespace

std::string config_hash(const ExperimentConfig& cfg) { return git_blob_hash(canonical_config(cfg)); }

nlohmann::json RunRecord::to_json() const {
    return {{"command", command}, {"config_hash", config_hash}, {"seed", seed},
            {"inputs", inputs},   {"outputs", outputs},         {"extra", extra}};
}

void RunRecord::save(const fs::path& dir) const { write_text(dir / "run.json", to_json().dump(2) + "\n"); }

void require_scales(const Manifest& manifest, const std::vector<int>& required) {
    const auto have = manifest.scales();
    std::vector<int> missing;
    for (int s : required)
        if (std::find(have.begin(), have.end(), s) == have.end()) missing.push_back(s);
    if (missing.empty()) return;
    std::string list;
    for (int s : missing) list += (list.empty() ? "" : ", ") + std::to_string(s);
    throw DataError("manifest has no clips for required scale(s) " + list);
}

std::vector<TrainingExample> load_training_examples(const Manifest& manifest, const fs::path& dir,
                                                    const Denoiser<float>& model, const std::vector<int>& scales) {
    std::vector<TrainingExample> out;
    for (const auto& r : manifest.with_scales(scales).records)
        out.push_back({load_record_clip(dir, r), model.text_encoder().encode(r.caption)});
    return out;
}

DataResult cmd_data(const DataConfig& cfg, const std::string& stage, const fs::path& out) {
    DataResult res;
    if (stage == "all") res.stages = run_data_pipeline(cfg, out);
    else if (stage == "synth") res.stages = {stage_synth(cfg, out)};
    else if (stage == "filter") res.stages = {stage_filter(cfg, out)};
    else if (stage == "score") res.stages = {stage_score(cfg, out)};
    else if (stage == "cut") res.stages = {stage_cut(cfg, out)};
    else if (stage == "annotate") res.stages = {stage_annotate(cfg, out)};
    else if (stage == "testset") res.stages = {stage_testset(cfg, out)};
    else throw ArgumentError("unknown data stage '" + stage + "'");

    RunRecord rec;
    rec.command = "data " + stage;
    rec.config_hash = git_blob_hash(nlohmann::json(cfg).dump(2) + "\n");
    rec.seed = cfg.seed;
    if (fs::exists(out / "manifest.jsonl")) {
        res.manifest_checksum = Manifest::load(out).checksum();
        rec.outputs["manifest.jsonl"] = hash_file(out / "manifest.jsonl");
    }
    if (fs::exists(out / "test" / "manifest.jsonl")) {
        res.testset_checksum = Manifest::load(out / "test").checksum();
        rec.outputs["test/manifest.jsonl"] = hash_file(out / "test" / "manifest.jsonl");
    }
    for (const auto& s : res.stages)
        rec.extra["stages"].push_back({{"stage", s.stage}, {"inputs", s.inputs}, {"outputs", s.outputs},
                                       {"flagged", s.flagged}});
    rec.save(out);
    return res;
}

LossSummary summarize_losses(const std::vector<LossRecord>& log, int window) {
    if (log.empty()) throw StatisticsError("empty loss log");
    const auto smooth = smoothed_losses(log, window);
    const std::size_t head = std::min<std::size_t>(log.size(), static_cast<std::size_t>(window));
    return {smooth[head - 1], smooth.back()};
}

TrainResult cmd_train(const ExperimentConfig& cfg, const fs::path& data_dir, const fs::path& out,
                      const ProgressFn& progress) {
    cfg.validate();
    const fs::path mfile = manifest_file(data_dir);
    const Manifest manifest = Manifest::load(mfile);
    const auto scales = cfg.training_scales();
    require_scales(manifest, scales);

    const Rng root(cfg.train.seed);
    Denoiser<float> model(cfg.model, root.split("model").key());
    MoLState mol = init_mol<float>(model.lora_layers(), cfg.mol, root.split("mol").key());
    const auto data = load_training_examples(manifest, manifest_dir(data_dir), model, scales);
    spdlog::info("training on {} clips over scales [{}]", data.size(),
                 [&] {
                     std::string s;
                     for (int v : scales) s += (s.empty() ? "" : ",") + std::to_string(v);
                     return s;
                 }());

    TrainResult res;
    res.log = train(model, mol, data, cfg, progress);
    res.summary = summarize_losses(res.log);

    fs::create_directories(out);
    res.checkpoint = out / "checkpoint.ckpt";
    const nlohmann::json extra{{"config_hash", config_hash(cfg)}, {"steps", res.log.size()}};
    save_checkpoint(res.checkpoint, model, &mol, cfg.mol, extra);

    std::ostringstream csv;
    csv << "step,phase,frames,loss,smoothed\n";
    const auto smooth = smoothed_losses(res.log, kLossWindow);
    char buf[160];
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        const auto& r = res.log[i];
        std::snprintf(buf, sizeof buf, "%d,%s,%d,%.17g,%.17g\n", r.step, r.phase.c_str(), r.frames, r.loss, smooth[i]);
        csv << buf;
    }
    write_text(out / "loss.csv", csv.str());
    write_text(out / "config.json", canonical_config(cfg));

    RunRecord rec;
    rec.command = "train";
    rec.config_hash = config_hash(cfg);
    rec.seed = cfg.train.seed;
    rec.inputs[mfile.string()] = hash_file(mfile);
    rec.outputs["checkpoint.ckpt"] = hash_file(res.checkpoint);
    rec.outputs["loss.csv"] = hash_file(out / "loss.csv");
    rec.extra = {{"initial_smoothed_loss", res.summary.initial},
                 {"final_smoothed_loss", res.summary.final},
                 {"manifest_checksum", manifest.checksum()}};
    rec.save(out);
    return res;
}

nlohmann::json cmd_sample(const SampleRequest& req) {
    if (req.frames < 2) throw ArgumentError("--frames must be >= 2");
    const Checkpoint ck = load_checkpoint(req.checkpoint);
    const Denoiser<float> model = ck.denoiser();
    const MoLState* mol = ck.mol ? &*ck.mol : nullptr;
    const Image first = read_image(req.first);
    const Image last = read_image(req.last);

    SampleOptions o;
    o.steps = req.steps;
    o.clamp_endpoints = req.clamp_endpoints;
    o.cfg_scale = req.cfg_scale;
    o.seed = req.seed;
    o.fps = req.fps;
    VideoClip clip = sample<float>(model, first, last, model.text_encoder().encode(req.text), req.frames, mol, o);
    clip.caption = req.text;

    nlohmann::json meta{{"checkpoint", hash_file(req.checkpoint)},
                        {"seed", req.seed},
                        {"steps", req.steps},
                        {"cfg_scale", req.cfg_scale},
                        {"clamp_endpoints", req.clamp_endpoints}};
    if (mol && mol->experts_enabled) meta["routed_expert"] = route(req.frames, mol->scales);
    else meta["routed_expert"] = nullptr;
    write_clip(req.out, clip, ClipDtype::float32, meta);

    RunRecord rec;
    rec.command = "sample";
    rec.config_hash = git_blob_hash(nlohmann::json(ck.model).dump());
    rec.seed = req.seed;
    rec.inputs[req.checkpoint.string()] = meta["checkpoint"];
    rec.inputs[req.first.string()] = hash_file(req.first);
    rec.inputs[req.last.string()] = hash_file(req.last);
    rec.outputs[req.out.filename().string()] = hash_file(req.out);
    rec.extra = meta;
    write_text(fs::path(req.out.string() + ".run.json"), rec.to_json().dump(2) + "\n");
    return meta;
}

BenchReport cmd_bench(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& testset_dir,
                      const fs::path& out, const std::function<void(std::size_t, std::size_t)>& progress) {
    cfg.validate();
    const fs::path mfile = manifest_file(testset_dir);
    const Manifest testset = Manifest::load(mfile);
    const auto have = testset.scales();
    for (int s : cfg.data.scales)
        if (std::find(have.begin(), have.end(), s) == have.end())
            spdlog::warn("testset has no clips at scale {}; the row is reported absent", s);

    BenchOptions opts{cfg.bench, cfg.data, cfg.data.scales};
    RunRecord rec;
    rec.command = "bench";
    rec.config_hash = config_hash(cfg);
    rec.seed = cfg.bench.seed;
    rec.inputs[mfile.string()] = hash_file(mfile);

    BenchReport report;
    if (checkpoint.empty()) {
        report = bench_run(GroundTruthGenerator{}, testset, manifest_dir(testset_dir), opts, progress);
        rec.extra["generator"] = "ground_truth";
    } else {
        const Checkpoint ck = load_checkpoint(checkpoint);
        const Denoiser<float> model = ck.denoiser();
        const ModelGenerator gen(model, ck.mol ? &*ck.mol : nullptr, cfg.bench.sample_steps, cfg.bench.cfg_scale);
        report = bench_run(gen, testset, manifest_dir(testset_dir), opts, progress);
        rec.inputs[checkpoint.string()] = hash_file(checkpoint);
        rec.extra["generator"] = "checkpoint";
    }
    write_bench_report(report, out);
    for (const char* f : {"report.csv", "report.md", "per_clip.csv"}) rec.outputs[f] = hash_file(out / f);
    rec.extra["failed_clips"] = report.failed;
    rec.extra["clips"] = report.clips.size();
    rec.save(out);
    return report;
}

std::vector<std::pair<std::string, ExperimentConfig>> ablation_variants(const ExperimentConfig& base) {
    ExperimentConfig full = base;
    ExperimentConfig no_mol = base;
    no_mol.mol.enabled = false;
    ExperimentConfig single = base;
    single.data.scales = {base.mol.single_scale};
    return {{kRowWithoutMultiFrame, single}, {kRowWithoutMoL, no_mol}, {kRowFull, full}};
}

std::vector<std::string> config_diff(const ExperimentConfig& a, const ExperimentConfig& b) {
    const nlohmann::json fa = nlohmann::json(a).flatten();
    const nlohmann::json fb = nlohmann::json(b).flatten();
    std::set<std::string> keys;
    const auto key_of = [](const std::string& pointer) {
        std::string out;
        std::stringstream ss(pointer);
        std::string part;
        while (std::getline(ss, part, '/')) {
            if (part.empty()) continue;
            if (std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; })) break;
            out += (out.empty() ? "" : ".") + part;
        }
        return out;
    };
    for (const auto& [k, v] : fa.items())
        if (!fb.contains(k) || fb.at(k) != v) keys.insert(key_of(k));
    for (const auto& [k, v] : fb.items())
        if (!fa.contains(k)) keys.insert(key_of(k));
    return {keys.begin(), keys.end()};
}

AblationResult cmd_ablate(const ExperimentConfig& base, const fs::path& data_dir, const fs::path& out,
                          const std::function<void(const std::string&)>& log) {
    base.validate();
    const auto say = [&](const std::string& m) {
        if (log) log(m);
    };
    if (!fs::exists(data_dir / "manifest.jsonl")) {
        say("building data in " + data_dir.string());
        cmd_data(base.data, "all", data_dir);
    }
    AblationResult res;
    res.data_checksum = Manifest::load(data_dir).checksum();
    const std::string test_checksum = Manifest::load(data_dir / "test").checksum();

    RunRecord rec;
    rec.command = "ablate";
    rec.config_hash = config_hash(base);
    rec.seed = base.train.seed;
    rec.inputs[(data_dir / "manifest.jsonl").string()] = hash_file(data_dir / "manifest.jsonl");
    rec.inputs[(data_dir / "test" / "manifest.jsonl").string()] = hash_file(data_dir / "test" / "manifest.jsonl");

    const std::map<std::string, std::string> slug{
        {kRowWithoutMultiFrame, "wo_multi_frame"}, {kRowWithoutMoL, "wo_mol"}, {kRowFull, "full"}};
    for (const auto& [label, cfg] : ablation_variants(base)) {
        AblationRow row;
        row.label = label;
        const fs::path dir = out / slug.at(label);
        nlohmann::json variant{{"label", label}, {"dir", slug.at(label)}, {"config_hash", config_hash(cfg)},
                               {"diff", config_diff(base, cfg)}};
        try {
            say("training " + label);
            const auto tr = cmd_train(cfg, data_dir, dir);
            if (Manifest::load(data_dir).checksum() != res.data_checksum)
                throw DataError("training manifest changed during the ablation");
            say("benchmarking " + label);
            row.report = cmd_bench(cfg, tr.checkpoint, data_dir / "test", dir / "bench");
            if (Manifest::load(data_dir / "test").checksum() != test_checksum)
                throw DataError("testset manifest changed during the ablation");
            row.ok = true;
            variant["final_smoothed_loss"] = tr.summary.final;
        } catch (const Error& e) {
            row.error = e.what();
            variant["error"] = row.error;
            spdlog::error("ablation variant '{}' failed: {}", label, row.error);
        }
        variant["data_checksum"] = res.data_checksum;
        rec.extra["variants"].push_back(variant);
        res.rows.push_back(std::move(row));
    }
    write_text(out / "ablation.md", ablation_markdown(res.rows));
    write_text(out / "ablation.csv", ablation_csv(res.rows));
    rec.outputs["ablation.md"] = hash_file(out / "ablation.md");
    rec.outputs["ablation.csv"] = hash_file(out / "ablation.csv");
    rec.extra["data_checksum"] = res.data_checksum;
    rec.extra["testset_checksum"] = test_checksum;
    rec.save(out);
    return res;
}

BenchReport read_per_clip_csv(const std::string& text, const std::vector<int>& scales) {
    std::istringstream in(text);
    std::string line;
    const auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cell;
        std::stringstream ss(s);
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    if (!std::getline(in, line)) throw FormatError("per-clip CSV is empty");
    const auto header = split(line);
    if (header.size() < 3 || header[0] != "clip_id" || header[1] != "scale" || header[2] != "status")
        throw FormatError("per-clip CSV header must start with clip_id,scale,status");

    BenchReport report;
    report.scales = scales;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) throw FormatError("per-clip CSV row has " + std::to_string(cells.size()) +
                                                             " cells, header has " + std::to_string(header.size()));
        ClipEvaluation ev;
        ev.clip_id = cells[0];
        ev.scale = std::stoi(cells[1]);
        ev.failed = cells[2] != "ok";
        for (std::size_t i = 3; i < cells.size(); ++i)
            if (!cells[i].empty()) {
                ev.values[header[i]] = std::stod(cells[i]);
                seen.insert(header[i]);
            }
        report.clips.push_back(std::move(ev));
    }
    for (std::size_t i = 3; i < header.size(); ++i)
        if (!seen.count(header[i])) report.unavailable.push_back(header[i]);
    report.aggregate();
    return report;
}

nlohmann::json cmd_report(const fs::path& run_dir, const std::vector<int>& scales) {
    nlohmann::json summary = nlohmann::json::object();
    RunRecord rec;
    rec.command = "report";
    bool any = false;
    if (fs::exists(run_dir / "per_clip.csv")) {
        any = true;
        rec.inputs["per_clip.csv"] = hash_file(run_dir / "per_clip.csv");
        const BenchReport report = read_per_clip_csv(read_text(run_dir / "per_clip.csv"), scales);
        write_text(run_dir / "report.csv", report.to_csv());
        write_text(run_dir / "report.md", report.to_markdown());
        rec.outputs["report.csv"] = hash_file(run_dir / "report.csv");
        rec.outputs["report.md"] = hash_file(run_dir / "report.md");
        summary["clips"] = report.clips.size();
        summary["failed_clips"] = report.failed;
        for (const auto& [k, r] : report.all) summary["all"][k] = r.value;
    }
    if (fs::exists(run_dir / "loss.csv")) {
        any = true;
        rec.inputs["loss.csv"] = hash_file(run_dir / "loss.csv");
        std::istringstream in(read_text(run_dir / "loss.csv"));
        std::string line;
        std::getline(in, line);
        std::vector<LossRecord> log;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string step, phase, frames, loss;
            std::getline(ss, step, ',');
            std::getline(ss, phase, ',');
            std::getline(ss, frames, ',');
            std::getline(ss, loss, ',');
            log.push_back({std::stoi(step), phase, std::stoi(frames), std::stod(loss)});
        }
        const LossSummary s = summarize_losses(log);
        summary["loss"] = {{"steps", log.size()},
                           {"initial_smoothed", s.initial},
                           {"final_smoothed", s.final},
                           {"ratio", s.ratio()},
                           {"window", kLossWindow}};
        write_text(run_dir / "loss_summary.json", summary["loss"].dump(2) + "\n");
        rec.outputs["loss_summary.json"] = hash_file(run_dir / "loss_summary.json");
    }
    if (!any) throw DataError(run_dir.string() + " holds neither per_clip.csv nor loss.csv");
    rec.extra = summary;
    write_text(run_dir / "report_run.json", rec.to_json().dump(2) + "\n");
    return summary;
}

}  // namespace semfi
