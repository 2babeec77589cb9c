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

#include "semfi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "semfi/errors.hpp"

namespace semfi {

namespace {

constexpr int kSuper = 4;

double sign_area(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

bool inside(const ShapeTrack& s, double x, double y, Point at) {
    const double dx = x - at.x, dy = y - at.y;
    if (s.shape == "circle") return dx * dx + dy * dy <= s.size * s.size;
    if (s.shape == "square") return std::abs(dx) <= s.size && std::abs(dy) <= s.size;
    // upward triangle inscribed in the size-radius circle
    const Point p{x, y};
    const Point a{at.x, at.y - s.size}, b{at.x - s.size * 0.866, at.y + s.size * 0.5},
        c{at.x + s.size * 0.866, at.y + s.size * 0.5};
    const double d1 = sign_area(a, b, p), d2 = sign_area(b, c, p), d3 = sign_area(c, a, p);
    const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(neg && pos);
}

float quantize(double v) { return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f; }

std::array<float, 3> arr3(const nlohmann::json& j) { return {j.at(0).get<float>(), j.at(1).get<float>(), j.at(2).get<float>()}; }

}  // namespace

const std::vector<PaletteColor>& palette() {
    static const std::vector<PaletteColor> p{
        {"red", {0.90f, 0.15f, 0.15f}},   {"green", {0.15f, 0.80f, 0.20f}}, {"blue", {0.20f, 0.30f, 0.95f}},
        {"yellow", {0.95f, 0.90f, 0.15f}}, {"cyan", {0.15f, 0.85f, 0.90f}}, {"magenta", {0.90f, 0.20f, 0.85f}},
        {"orange", {0.98f, 0.55f, 0.10f}}, {"white", {0.97f, 0.97f, 0.97f}},
    };
    return p;
}

const std::vector<std::string>& shape_names() {
    static const std::vector<std::string> s{"circle", "square", "triangle"};
    return s;
}

Point ShapeTrack::position(double u) const {
    if (trajectory == "circular") {
        const double sgn = direction == "clockwise" ? 1.0 : -1.0;  // y grows downward
        const double a = phase + sgn * 2.0 * std::numbers::pi * turns * u;
        return {center.x + radius * std::cos(a), center.y + radius * std::sin(a)};
    }
    return {start.x + (end.x - start.x) * u, start.y + (end.y - start.y) * u};
}

double ShapeTrack::coverage(double px, double py, Point at) const {
    if (std::abs(px + 0.5 - at.x) > size + 1.0 || std::abs(py + 0.5 - at.y) > size + 1.0) return 0.0;
    int hits = 0;
    for (int sy = 0; sy < kSuper; ++sy)
        for (int sx = 0; sx < kSuper; ++sx)
            hits += inside(*this, px + (sx + 0.5) / kSuper, py + (sy + 0.5) / kSuper, at) ? 1 : 0;
    return static_cast<double>(hits) / (kSuper * kSuper);
}

std::string ShapeTrack::describe() const {
    const std::string noun = "a " + color + " " + shape;
    if (trajectory == "circular") return noun + " circles " + direction;
    if (trajectory == "enter") {
        static const std::map<std::string, std::string> from{
            {"right", "left"}, {"left", "right"}, {"down", "top"}, {"up", "bottom"}};
        return noun + " enters from the " + from.at(direction) + " moving " + direction;
    }
    if (trajectory == "exit") return noun + " exits moving " + direction;
    return noun + " moves " + direction;
}

void to_json(nlohmann::json& j, const ShapeTrack& s) {
    j = {{"shape", s.shape},
         {"color", s.color},
         {"rgb", s.rgb},
         {"size", s.size},
         {"trajectory", s.trajectory},
         {"direction", s.direction},
         {"start", {s.start.x, s.start.y}},
         {"end", {s.end.x, s.end.y}},
         {"center", {s.center.x, s.center.y}},
         {"radius", s.radius},
         {"phase", s.phase},
         {"turns", s.turns}};
}

void from_json(const nlohmann::json& j, ShapeTrack& s) {
    try {
        s.shape = j.at("shape").get<std::string>();
        s.color = j.at("color").get<std::string>();
        s.rgb = arr3(j.at("rgb"));
        s.size = j.at("size").get<double>();
        s.trajectory = j.at("trajectory").get<std::string>();
        s.direction = j.at("direction").get<std::string>();
        s.start = {j.at("start").at(0).get<double>(), j.at("start").at(1).get<double>()};
        s.end = {j.at("end").at(0).get<double>(), j.at("end").at(1).get<double>()};
        s.center = {j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>()};
        s.radius = j.at("radius").get<double>();
        s.phase = j.at("phase").get<double>();
        s.turns = j.at("turns").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad shape metadata: ") + e.what());
    }
}

double SynthScene::progress(int i) const {
    return source_frames > 1 ? static_cast<double>(i) / (source_frames - 1) : 0.0;
}

Volume<float> SynthScene::render(int first, int count, int height, int width, int channels) const {
    if (channels != 1 && channels != 3) throw ConfigError("synthetic videos support 1 or 3 channels");
    Volume<float> out(count, height, width, channels);
    std::vector<double> rgb(3);
    for (int n = 0; n < count; ++n) {
        const double u = progress(first + n);
        std::vector<Point> at;
        for (const auto& s : shapes) at.push_back(s.position(u));
        for (int y = 0; y < height; ++y) {
            const double t = height > 1 ? static_cast<double>(y) / (height - 1) : 0.0;
            for (int x = 0; x < width; ++x) {
                for (int c = 0; c < 3; ++c) rgb[c] = bg_top[c] + (bg_bottom[c] - bg_top[c]) * t;
                for (std::size_t k = 0; k < shapes.size(); ++k) {
                    const double cov = shapes[k].coverage(x, y, at[k]);
                    if (cov <= 0.0) continue;
                    for (int c = 0; c < 3; ++c) rgb[c] = (1.0 - cov) * rgb[c] + cov * shapes[k].rgb[c];
                }
                if (channels == 1) out.at(n, y, x, 0) = quantize(0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]);
                else
                    for (int c = 0; c < 3; ++c) out.at(n, y, x, c) = quantize(rgb[c]);
            }
        }
    }
    return out;
}

void SynthScene::displacement(int ia, int ib, int height, int width, std::vector<float>& u,
                              std::vector<float>& v) const {
    u.assign(static_cast<std::size_t>(height) * width, 0.0f);
    v.assign(u.size(), 0.0f);
    const double ua = progress(ia), ub = progress(ib);
    for (std::size_t k = 0; k < shapes.size(); ++k) {
        const Point pa = shapes[k].position(ua), pb = shapes[k].position(ub);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (inside(shapes[k], x + 0.5, y + 0.5, pa)) {
                    u[y * width + x] = static_cast<float>(pb.x - pa.x);
                    v[y * width + x] = static_cast<float>(pb.y - pa.y);
                }
    }
}

void to_json(nlohmann::json& j, const SynthScene& s) {
    j = {{"shapes", s.shapes},
         {"bg_top", s.bg_top},
         {"bg_bottom", s.bg_bottom},
         {"source_frames", s.source_frames},
         {"frame_offset", s.frame_offset}};
}

void from_json(const nlohmann::json& j, SynthScene& s) {
    try {
        s.shapes = j.at("shapes").get<std::vector<ShapeTrack>>();
        s.bg_top = arr3(j.at("bg_top"));
        s.bg_bottom = arr3(j.at("bg_bottom"));
        s.source_frames = j.at("source_frames").get<int>();
        s.frame_offset = j.value("frame_offset", 0);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad scene metadata: ") + e.what());
    }
}

SynthVideo synth_video(const DataConfig& cfg, Rng rng, const std::string& video_id, int frames, int fps) {
    const double H = cfg.height, W = cfg.width, amp = cfg.motion_amplitude;
    SynthScene scene;
    scene.source_frames = frames;
    const double base = rng.uniform(0.05, 0.3);
    for (int c = 0; c < 3; ++c) {
        scene.bg_top[c] = static_cast<float>(base + rng.uniform(-0.05, 0.05));
        scene.bg_bottom[c] = static_cast<float>(base * 0.4 + rng.uniform(-0.03, 0.03));
    }
    const int count = static_cast<int>(rng.uniform_int(1, cfg.max_shapes));
    const auto& pal = palette();
    std::vector<int> colors(pal.size());
    for (std::size_t i = 0; i < colors.size(); ++i) colors[i] = static_cast<int>(i);
    for (std::size_t i = colors.size(); i > 1; --i)
        std::swap(colors[i - 1], colors[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    static const char* kTraj[] = {"linear", "linear", "circular", "enter", "exit"};
    static const char* kDir[] = {"right", "left", "up", "down"};
    const double m = std::min(H, W);
    for (int k = 0; k < count; ++k) {
        ShapeTrack s;
        s.shape = shape_names()[static_cast<std::size_t>(rng.uniform_int(0, 2))];
        const auto& col = pal[static_cast<std::size_t>(colors[k])];
        s.color = col.name;
        s.rgb = col.rgb;
        s.size = m * rng.uniform(0.10, 0.18);
        s.trajectory = kTraj[rng.uniform_int(0, 4)];
        if (s.trajectory == "circular") {
            s.direction = rng.uniform() < 0.5 ? "clockwise" : "counterclockwise";
            s.center = {W * rng.uniform(0.35, 0.65), H * rng.uniform(0.35, 0.65)};
            s.radius = amp * m * rng.uniform(0.12, 0.25);
            s.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            s.turns = rng.uniform(0.4, 1.0);
        } else {
            s.direction = kDir[rng.uniform_int(0, 3)];
            const bool horizontal = s.direction == "right" || s.direction == "left";
            const double sgn = (s.direction == "right" || s.direction == "down") ? 1.0 : -1.0;
            const double across = (horizontal ? H : W) * rng.uniform(0.25, 0.75);
            const double extent = horizontal ? W : H;
            double a0, a1;
            if (s.trajectory == "enter") {
                a1 = extent * rng.uniform(0.4, 0.6);
                a0 = a1 - sgn * amp * (extent * 0.5 + s.size);
            } else if (s.trajectory == "exit") {
                a0 = extent * rng.uniform(0.4, 0.6);
                a1 = a0 + sgn * amp * (extent * 0.5 + s.size);
            } else {
                const double travel = amp * extent * rng.uniform(0.3, 0.55);
                a0 = extent * 0.5 - sgn * travel * 0.5;
                a1 = a0 + sgn * travel;
            }
            s.start = horizontal ? Point{a0, across} : Point{across, a0};
            s.end = horizontal ? Point{a1, across} : Point{across, a1};
        }
        scene.shapes.push_back(s);
    }
    SynthVideo v;
    v.video_id = video_id;
    v.scene = scene;
    v.clip.frames = scene.render(0, frames, cfg.height, cfg.width, cfg.channels);
    v.clip.fps = fps;
    v.clip.caption = procedural_caption(scene);
    return v;
}

SynthVideo synth_corpus_video(const DataConfig& cfg, std::uint64_t seed, int index) {
    if (cfg.fps_choices.empty()) throw ConfigError("data.fps_choices is empty");
    Rng rng = Rng(seed).split("synth").split(static_cast<std::uint64_t>(index));
    const int frames = static_cast<int>(rng.uniform_int(cfg.f_max, 4 * cfg.f_max));
    const int fps = cfg.fps_choices[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(cfg.fps_choices.size()) - 1))];
    char id[16];
    std::snprintf(id, sizeof id, "v%04d", index);
    return synth_video(cfg, rng.split("video"), id, frames, fps);
}

SynthVideo synth_test_video(const DataConfig& cfg, std::uint64_t seed, int index) {
    std::vector<int> fps;
    for (int f : cfg.fps_choices)
        if (f <= 30) fps.push_back(f);
    if (fps.empty()) fps.push_back(24);
    Rng rng = Rng(seed).split("testset").split(static_cast<std::uint64_t>(index));
    const int frames = static_cast<int>(rng.uniform_int(cfg.f_max, 4 * cfg.f_max));
    const int f = fps[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(fps.size()) - 1))];
    char id[16];
    std::snprintf(id, sizeof id, "t%04d", index);
    return synth_video(cfg, rng.split("video"), id, frames, f);
}

std::vector<SynthVideo> synth_generate(const DataConfig& cfg, std::uint64_t seed) {
    std::vector<SynthVideo> out;
    for (int i = 0; i < cfg.num_videos; ++i) out.push_back(synth_corpus_video(cfg, seed, i));
    return out;
}

std::vector<SynthVideo> synth_testset(const DataConfig& cfg, std::uint64_t seed) {
    std::vector<SynthVideo> out;
    for (int i = 0; i < cfg.test_videos; ++i) out.push_back(synth_test_video(cfg, seed, i));
    return out;
}

std::string procedural_caption(const SynthScene& scene) {
    std::string out;
    for (std::size_t k = 0; k < scene.shapes.size(); ++k) {
        if (k > 0) out += k + 1 == scene.shapes.size() ? " and " : ", ";
        out += scene.shapes[k].describe();
    }
    const double lum = (scene.bg_top[0] + scene.bg_top[1] + scene.bg_top[2]) / 3.0;
    out += lum < 0.18 ? " on a dark background" : " on a gray background";
    return out;
}

}  // namespace semfi
