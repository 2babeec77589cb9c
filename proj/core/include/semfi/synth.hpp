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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semfi/config.hpp"
#include "semfi/rng.hpp"
#include "semfi/video.hpp"

namespace semfi {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// One moving shape. Coordinates are in pixels of the source video, and the
/// trajectory is a function of progress u in [0,1] over the whole video.
struct ShapeTrack {
    std::string shape;       // circle | square | triangle
    std::string color;       // palette name
    std::array<float, 3> rgb{};
    double size = 4.0;       // radius or half side, pixels
    std::string trajectory;  // linear | circular | enter | exit
    std::string direction;   // right | left | up | down | clockwise | counterclockwise
    Point start;             // linear/enter/exit endpoints
    Point end;
    Point center;            // circular
    double radius = 0.0;
    double phase = 0.0;
    double turns = 0.0;

    Point position(double u) const;
    /// Coverage of the pixel square at (px, py) in [0,1], 4x4 supersampled.
    double coverage(double px, double py, Point at) const;
    /// Caption fragment, e.g. "a red circle moves right".
    std::string describe() const;
};

void to_json(nlohmann::json& j, const ShapeTrack& s);
void from_json(const nlohmann::json& j, ShapeTrack& s);

struct SynthScene {
    std::vector<ShapeTrack> shapes;
    std::array<float, 3> bg_top{};
    std::array<float, 3> bg_bottom{};
    int source_frames = 0;
    /// First source frame covered by the clip this scene is attached to.
    int frame_offset = 0;

    /// Progress of absolute source frame index i.
    double progress(int i) const;
    /// Renders absolute source frames [first, first + count). Values are
    /// quantized to multiples of 1/255 so uint8 storage is lossless.
    Volume<float> render(int first, int count, int height, int width, int channels) const;
    /// Per-pixel displacement between absolute frames ia and ib, taken from the
    /// topmost shape covering each pixel in frame ia. Background is static.
    void displacement(int ia, int ib, int height, int width, std::vector<float>& u, std::vector<float>& v) const;
};

void to_json(nlohmann::json& j, const SynthScene& s);
void from_json(const nlohmann::json& j, SynthScene& s);

struct SynthVideo {
    std::string video_id;
    VideoClip clip;
    SynthScene scene;
};

/// Palette used by the generator and the semantic probe.
struct PaletteColor {
    const char* name;
    std::array<float, 3> rgb;
};
const std::vector<PaletteColor>& palette();
const std::vector<std::string>& shape_names();

/// One procedurally generated video with `frames` frames.
SynthVideo synth_video(const DataConfig& cfg, Rng rng, const std::string& video_id, int frames, int fps);

/// Video `index` of the corpus / testset, so stages can stream one at a time.
SynthVideo synth_corpus_video(const DataConfig& cfg, std::uint64_t seed, int index);
SynthVideo synth_test_video(const DataConfig& cfg, std::uint64_t seed, int index);

/// cfg.num_videos videos, deterministic per seed. Frame counts are drawn from
/// [f_max, 4 f_max] and fps from cfg.fps_choices.
std::vector<SynthVideo> synth_generate(const DataConfig& cfg, std::uint64_t seed);

/// Held-out videos for benchmarking: fps <= 30 and f >= f_max by construction.
std::vector<SynthVideo> synth_testset(const DataConfig& cfg, std::uint64_t seed);

/// Template caption from scene metadata, e.g. "a red circle moves right and a
/// blue square circles clockwise on a dark background".
std::string procedural_caption(const SynthScene& scene);

}  // namespace semfi
