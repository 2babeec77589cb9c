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

// Command line entry point. Exit codes: 0 ok, 1 other failure, 2 config or
// argument error, 3 data error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "semfi/config.hpp"
#include "semfi/errors.hpp"
#include "semfi/harness.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

semfi::ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) {
        semfi::ExperimentConfig cfg;
        cfg.validate();
        return cfg;
    }
    return semfi::load_experiment_config(path);
}

void print_report_summary(const semfi::BenchReport& r) {
    std::cout << r.to_markdown();
    std::cout << "clips: " << r.clips.size() << ", failed: " << r.failed << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semantic frame interpolation toolkit"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;

    auto* data = app.add_subcommand("data", "build the synthetic multi-scale dataset");
    std::string stage = "all";
    data->add_option("stage", stage, "synth|filter|score|cut|annotate|testset|all")
        ->check(CLI::IsMember({"synth", "filter", "score", "cut", "annotate", "testset", "all"}));
    data->add_option("--config", config_path, "experiment config JSON");
    data->add_option("--seed", seed, "corpus seed (overrides data.seed)");
    data->add_option("--out", out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train base and adapters");
    std::string data_dir;
    std::optional<int> steps;
    train->add_option("--config", config_path, "experiment config JSON");
    train->add_option("--data", data_dir, "dataset directory or manifest.jsonl")->required();
    train->add_option("--seed", seed, "training seed (overrides train.seed)");
    train->add_option("--steps", steps, "adapter-phase steps (overrides train.steps)");
    train->add_option("--out", out, "output directory")->required();

    auto* sample = app.add_subcommand("sample", "interpolate between two frames");
    semfi::SampleRequest req;
    bool no_clamp = false;
    sample->add_option("--ckpt", req.checkpoint, "checkpoint file")->required();
    sample->add_option("--first", req.first, "first frame image")->required();
    sample->add_option("--last", req.last, "last frame image")->required();
    sample->add_option("--text", req.text, "caption");
    sample->add_option("--frames", req.frames, "frames to generate, including both endpoints")->required();
    sample->add_option("--steps", req.steps, "sampling steps");
    sample->add_option("--seed", req.seed, "noise seed");
    sample->add_option("--cfg-scale", req.cfg_scale, "classifier-free guidance scale");
    sample->add_option("--fps", req.fps, "frame rate stored in the clip");
    sample->add_flag("--no-clamp", no_clamp, "do not paste the endpoint frames");
    sample->add_option("--out", req.out, "output clip file")->required();

    auto* bench = app.add_subcommand("bench", "evaluate a checkpoint on a testset");
    std::string ckpt;
    std::string testset;
    bool ground_truth = false;
    bench->add_option("--config", config_path, "experiment config JSON");
    bench->add_option("--ckpt", ckpt, "checkpoint file");
    bench->add_flag("--ground-truth", ground_truth, "score the ground truth against itself");
    bench->add_option("--testset", testset, "testset directory or manifest.jsonl")->required();
    bench->add_option("--out", out, "report directory")->required();

    auto* ablate = app.add_subcommand("ablate", "train and bench the three ablation variants");
    ablate->add_option("--config", config_path, "base experiment config JSON");
    ablate->add_option("--data", data_dir, "dataset directory (built when absent)");
    ablate->add_option("--out", out, "output directory")->required();

    auto* report = app.add_subcommand("report", "rebuild tables from per-clip values and loss logs");
    std::string run_dir;
    report->add_option("--config", config_path, "experiment config JSON (for the scale list)");
    report->add_option("--run", run_dir, "bench or train output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (data->parsed()) {
            auto cfg = load_config(config_path);
            if (seed) cfg.data.seed = *seed;
            const auto res = semfi::cmd_data(cfg.data, stage, out);
            for (const auto& s : res.stages)
                std::printf("%-9s in=%zu out=%zu flagged=%zu\n", s.stage.c_str(), s.inputs, s.outputs, s.flagged);
            if (!res.manifest_checksum.empty()) std::printf("manifest checksum %s\n", res.manifest_checksum.c_str());
            if (!res.testset_checksum.empty()) std::printf("testset checksum %s\n", res.testset_checksum.c_str());
        } else if (train->parsed()) {
            auto cfg = load_config(config_path);
            if (seed) cfg.train.seed = *seed;
            if (steps) cfg.train.steps = *steps;
            const auto res = semfi::cmd_train(cfg, data_dir, out, [](const semfi::LossRecord& r) {
                if (r.step % 50 == 0) spdlog::info("step {} [{}] N={} loss {:.5f}", r.step, r.phase, r.frames, r.loss);
            });
            std::printf("steps %zu, smoothed loss %.5f -> %.5f (ratio %.3f)\ncheckpoint %s\n", res.log.size(),
                        res.summary.initial, res.summary.final, res.summary.ratio(), res.checkpoint.c_str());
        } else if (sample->parsed()) {
            req.clamp_endpoints = !no_clamp;
            const auto meta = semfi::cmd_sample(req);
            std::printf("wrote %s (%d frames, routed expert %s)\n", req.out.c_str(), req.frames,
                        meta["routed_expert"].dump().c_str());
        } else if (bench->parsed()) {
            if (ground_truth == !ckpt.empty()) throw semfi::ArgumentError("pass exactly one of --ckpt or --ground-truth");
            const auto cfg = load_config(config_path);
            const auto r = semfi::cmd_bench(cfg, ground_truth ? fs::path{} : fs::path{ckpt}, testset, out,
                                            [](std::size_t i, std::size_t n) {
                                                if (i % 20 == 0 || i == n) spdlog::info("bench {}/{}", i, n);
                                            });
            print_report_summary(r);
        } else if (ablate->parsed()) {
            const auto cfg = load_config(config_path);
            const fs::path ddir = data_dir.empty() ? fs::path(out) / "data" : fs::path(data_dir);
            const auto res = semfi::cmd_ablate(cfg, ddir, out, [](const std::string& m) { spdlog::info("{}", m); });
            std::cout << semfi::ablation_markdown(res.rows);
            std::printf("data checksum %s\n", res.data_checksum.c_str());
            for (const auto& r : res.rows)
                if (!r.ok) return kExitOther;
        } else if (report->parsed()) {
            const auto cfg = load_config(config_path);
            std::cout << semfi::cmd_report(run_dir, cfg.data.scales).dump(2) << "\n";
        }
    } catch (const semfi::ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return kExitConfig;
    } catch (const semfi::ArgumentError& e) {
        spdlog::error("argument error: {}", e.what());
        return kExitConfig;
    } catch (const semfi::DataError& e) {
        spdlog::error("data error: {}", e.what());
        return kExitData;
    } catch (const semfi::FormatError& e) {
        spdlog::error("format error: {}", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitOther;
    }
    return kExitOk;
}
