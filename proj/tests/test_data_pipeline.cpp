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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "semfi/clip_io.hpp"
#include "semfi/errors.hpp"
#include "semfi/flow.hpp"
#include "semfi/hash.hpp"
#include "semfi/pipeline.hpp"
#include "semfi/synth.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace semfi {
namespace {

using testing::random_clip;
using testing::random_image;

const std::vector<int> kScales{5, 9, 17, 33, 65, 81};

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("semfi_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

DataConfig small_data() {
    DataConfig c;
    c.num_videos = 10;
    c.test_videos = 2;
    c.height = 16;
    c.width = 16;
    c.seed = 5;
    return c;
}

ManifestRecord record(const std::string& id, int n, int fps) {
    ManifestRecord r;
    r.clip_id = id;
    r.path = id + ".clp";
    r.N = n;
    r.fps = fps;
    return r;
}

Image shifted(const Image& src, int dx, int dy) {
    Image out(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c)
                out.at(y, x, c) = src.at(((y - dy) % src.height + src.height) % src.height,
                                         ((x - dx) % src.width + src.width) % src.width, c);
    return out;
}

TEST(Synth, DeterministicAndSized) {
    DataConfig c = small_data();
    const auto a = synth_generate(c, 3);
    const auto b = synth_generate(c, 3);
    ASSERT_EQ(a.size(), 10u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].clip.frames.data, b[i].clip.frames.data);
        EXPECT_EQ(a[i].video_id, b[i].video_id);
        EXPECT_GE(a[i].clip.num_frames(), c.f_max);
        EXPECT_LE(a[i].clip.num_frames(), 4 * c.f_max);
    }
    c.num_videos = 100;
    c.height = c.width = 8;
    EXPECT_EQ(synth_generate(c, 1).size(), 100u);
}

TEST(Synth, ZeroMotionKeepsEndpointsEqual) {
    DataConfig c = small_data();
    c.motion_amplitude = 0.0;
    for (const auto& v : synth_generate(c, 4)) {
        const auto first = v.clip.frames.frame(0);
        const auto last = v.clip.frames.frame(v.clip.num_frames() - 1);
        EXPECT_TRUE(std::equal(first.begin(), first.end(), last.begin())) << v.video_id;
    }
}

TEST(Synth, TestsetRespectsFilter) {
    const DataConfig c = small_data();
    for (const auto& v : synth_testset(c, 1))
        EXPECT_TRUE(passes_candidate_filter(v.clip.num_frames(), v.clip.fps, c.f_max)) << v.video_id;
}

TEST(FilterCandidates, Boundaries) {
    EXPECT_FALSE(passes_candidate_filter(100, 60, 81));
    EXPECT_TRUE(passes_candidate_filter(81, 24, 81));
    EXPECT_TRUE(passes_candidate_filter(324, 30, 81));
    EXPECT_FALSE(passes_candidate_filter(400, 24, 81));
    EXPECT_FALSE(passes_candidate_filter(80, 24, 81));

    Manifest m;
    m.records = {record("a", 100, 60), record("b", 81, 24), record("c", 400, 24)};
    const auto kept = filter_candidates(m);
    ASSERT_EQ(kept.records.size(), 1u);
    EXPECT_EQ(kept.records[0].clip_id, "b");
}

TEST(ClipScore, Examples) {
    const DownsampledPixelFeatures fx(16);
    const Image a = random_image(32, 32, 3, 1), b = random_image(32, 32, 3, 2);
    EXPECT_NEAR(clip_score(a, a, fx), 1.0, 1e-6);
    EXPECT_DOUBLE_EQ(clip_score(a, b, fx), clip_score(b, a, fx));
    EXPECT_NEAR(clip_score(Image(32, 32, 3, 0.0f), Image(32, 32, 3, 1.0f), fx), -1.0, 1e-6);
    EXPECT_THROW(clip_score(Image(32, 32, 3, 0.5f), a, fx), DegenerateFeatureError);
}

TEST(FlowScore, IdealEstimatorIsLinear) {
    const GlobalShiftFlow ideal(8);
    const Image a = random_image(24, 24, 1, 9);
    EXPECT_EQ(flow_score(a, a, ideal), 0.0);
    EXPECT_NEAR(flow_score(a, shifted(a, 3, 0), ideal), 3.0, 1e-9);
    EXPECT_NEAR(flow_score(a, shifted(a, 6, 0), ideal), 6.0, 1e-9);
    EXPECT_NEAR(flow_score(a, shifted(a, 3, 4), ideal), 5.0, 1e-9);
}

TEST(FlowScore, PyramidLucasKanadeIsNonNegative) {
    const PyramidLucasKanade lk;
    const Image a = random_image(24, 24, 1, 9);
    EXPECT_NEAR(flow_score(a, a, lk), 0.0, 1e-9);
    EXPECT_GE(flow_score(a, random_image(24, 24, 1, 10), lk), 0.0);
}

TEST(FlowScore, GroundTruthFromScene) {
    DataConfig c = small_data();
    const auto v = synth_corpus_video(c, 1, 0);
    const SceneFlow gt(v.scene);
    EXPECT_EQ(flow_score(v.clip, 0, 0, gt), 0.0);
    EXPECT_GE(flow_score(v.clip, 0, v.clip.num_frames() - 1, gt), 0.0);
}

TEST(Percentile, MatchesNumpyLinear) {
    EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
    EXPECT_DOUBLE_EQ(percentile({10}, 95), 10.0);
    EXPECT_NEAR(percentile({3, 1, 2, 5, 4}, 5), 1.2, 1e-12);
}

TEST(ThresholdFilter, VacuousAndPercentile) {
    Manifest m;
    std::vector<double> sc, sf;
    for (int i = 0; i < 100; ++i) {
        auto r = record("r" + std::to_string(100 + i), 81, 24);
        r.S_c = i / 100.0;
        r.S_f = 2.0;
        sc.push_back(r.S_c);
        sf.push_back(r.S_f);
        m.records.push_back(r);
    }
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_EQ(threshold_filter(m, ScoreThresholds{-inf, inf, -inf, inf}).records.size(), 100u);

    ThresholdConfig pct;
    const auto t = resolve_thresholds(pct, sc, sf);
    // sorted scores 0.00..0.99: 5th pct 0.0495, 95th 0.9405 -> 0.05..0.94 survive
    EXPECT_EQ(threshold_filter(m, t).records.size(), 90u);

    ScoreThresholds tight{-1.0, 0.5, 0.0, 1e9};
    auto above = m;
    above.records[0].S_c = 0.75;
    const auto kept = threshold_filter(above, tight);
    for (const auto& r : kept.records) EXPECT_NE(r.clip_id, above.records[0].clip_id);

    ThresholdConfig bad;
    bad.mode = ThresholdMode::absolute;
    bad.clip_low = 0.9;
    bad.clip_high = 0.1;
    EXPECT_THROW(resolve_thresholds(bad, sc, sf), ConfigError);
}

TEST(ThresholdFilter, TighteningIsMonotone) {
    Manifest m;
    for (int i = 0; i < 50; ++i) {
        auto r = record("r" + std::to_string(100 + i), 81, 24);
        r.S_c = std::sin(i * 0.37);
        r.S_f = 3.0 + 2.0 * std::cos(i * 0.91);
        m.records.push_back(r);
    }
    std::size_t prev = m.records.size() + 1;
    for (double w = 1.0; w >= 0.0; w -= 0.1) {
        const auto n = threshold_filter(m, ScoreThresholds{-w, w, 3.0 - 2.0 * w, 3.0 + 2.0 * w}).records.size();
        EXPECT_LE(n, prev);
        prev = n;
    }
}

TEST(MultiScaleCut, Examples) {
    const auto plans = plan_cuts(162, kScales);
    ASSERT_EQ(plans.size(), 6u);
    EXPECT_EQ(plans[0].scale, 5);
    EXPECT_EQ(plans[0].start, 79);

    const VideoClip v81 = random_clip(81, 4, 4, 1, 3);
    const auto cuts = multi_scale_cut(v81, kScales);
    ASSERT_EQ(cuts.size(), 6u);
    EXPECT_EQ(cuts.back().frames.data, v81.frames.data);

    EXPECT_TRUE(multi_scale_cut(random_clip(4, 4, 4, 1, 1), kScales).empty());
    EXPECT_EQ(plan_cuts(40, kScales).size(), 4u);
}

TEST(MultiScaleCut, EndpointsAreBitIdentical) {
    const VideoClip v = random_clip(130, 4, 4, 2, 8);
    for (const auto& p : plan_cuts(130, kScales)) {
        const VideoClip c = cut(v, p.start, p.scale);
        ASSERT_EQ(c.num_frames(), p.scale);
        const auto f = c.frames.frame(0), l = c.frames.frame(p.scale - 1);
        const auto sf = v.frames.frame(p.start), sl = v.frames.frame(p.start + p.scale - 1);
        EXPECT_TRUE(std::equal(f.begin(), f.end(), sf.begin()));
        EXPECT_TRUE(std::equal(l.begin(), l.end(), sl.begin()));
        EXPECT_LE(std::abs((p.start + (p.scale - 1) / 2.0) - (130 - 1) / 2.0), 1.0);
    }
    EXPECT_THROW(cut(v, 128, 5), RangeError);
}

TEST(Annotate, ProceduralCaptions) {
    SynthScene scene;
    ShapeTrack t;
    t.shape = "circle";
    t.color = "red";
    t.rgb = {1.0f, 0.0f, 0.0f};
    t.trajectory = "linear";
    t.direction = "right";
    t.start = {2, 8};
    t.end = {14, 8};
    scene.shapes = {t};
    scene.source_frames = 9;
    const VideoClip clip{scene.render(0, 9, 16, 16, 3), 24, ""};
    const nlohmann::json meta{{"scene", scene}};
    const ProceduralCaptioner cap;
    const auto a = annotate(clip, meta, cap);
    EXPECT_FALSE(a.caption_missing);
    for (const char* word : {"red", "circle", "right"}) EXPECT_NE(a.caption.find(word), std::string::npos) << word;
    EXPECT_EQ(annotate(clip, meta, cap).caption, a.caption);
}

TEST(Annotate, UnreachableCaptionerFlagsRecord) {
    const HttpCaptioner cap("http://127.0.0.1:9/caption", 0.5);
    const auto a = annotate(random_clip(5, 4, 4, 3, 1), nlohmann::json::object(), cap);
    EXPECT_TRUE(a.caption_missing);
}

TEST(ClipIo, RoundTripBothDtypes) {
    const VideoClip q = [] {
        VideoClip c = random_clip(3, 5, 4, 3, 2, "a caption");
        for (auto& v : c.frames.data) v = std::round(v * 255.0f) / 255.0f;
        return c;
    }();
    for (const auto dtype : {ClipDtype::uint8, ClipDtype::float32}) {
        const auto bytes = encode_clip(q, dtype, {{"k", 1}});
        const StoredClip back = decode_clip(bytes);
        EXPECT_EQ(back.dtype, dtype);
        EXPECT_EQ(back.clip.caption, "a caption");
        EXPECT_EQ(back.meta["k"], 1);
        ASSERT_TRUE(back.clip.frames.same_shape(q.frames));
        for (std::size_t i = 0; i < q.frames.data.size(); ++i)
            EXPECT_NEAR(back.clip.frames.data[i], q.frames.data[i], 1e-6);
        EXPECT_EQ(encode_clip(back.clip, dtype, back.meta), bytes);
    }
}

TEST(ClipIo, CorruptHeaderNamesField) {
    auto bytes = encode_clip(random_clip(2, 2, 2, 1, 1), ClipDtype::float32);
    EXPECT_THROW(decode_clip({bytes.begin(), bytes.begin() + 4}), FormatError);
    bytes.resize(bytes.size() - 3);
    try {
        decode_clip(bytes);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("blob"), std::string::npos) << e.what();
    }
}

TEST(ImageIo, PngAndPnmRoundTrip) {
    const fs::path dir = temp_dir("image_io");
    Image img = random_image(6, 7, 3, 4);
    for (auto& v : img.data) v = std::round(v * 255.0f) / 255.0f;
    for (const char* name : {"a.png", "a.ppm"}) {
        write_image(dir / name, img);
        const Image back = read_image(dir / name);
        ASSERT_TRUE(back.same_shape(img));
        for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-6) << name;
    }
}

TEST(Hash, GitBlobConvention) {
    // `printf 'hello\n' | git hash-object --stdin`
    EXPECT_EQ(git_blob_hash(std::string_view("hello\n")), "ce013625030ba8dba906f756967f9e9ca394464a");
    EXPECT_EQ(git_blob_hash(std::string_view("")), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Manifest, JsonlRoundTripAndDuplicates) {
    Manifest m;
    m.records = {record("b", 5, 24), record("a", 9, 30)};
    m.records[0].caption = "x \"quoted\"";
    const std::string text = m.to_jsonl();
    const Manifest back = Manifest::from_jsonl(text);
    ASSERT_EQ(back.records.size(), 2u);
    EXPECT_EQ(back.records[0].clip_id, "a");
    EXPECT_EQ(back.to_jsonl(), text);
    EXPECT_THROW(Manifest::from_jsonl(text + text), FormatError);
    EXPECT_THROW(Manifest::load(fs::path("/nonexistent/manifest.jsonl")), DataError);
}

TEST(Pipeline, InvariantsAndDeterminism) {
    const DataConfig c = small_data();
    const fs::path a = temp_dir("pipe_a"), b = temp_dir("pipe_b");
    run_data_pipeline(c, a);
    run_data_pipeline(c, b);
    EXPECT_EQ(hash_file(a / "manifest.jsonl"), hash_file(b / "manifest.jsonl"));
    EXPECT_EQ(hash_file(a / "test" / "manifest.jsonl"), hash_file(b / "test" / "manifest.jsonl"));

    const Manifest retained = Manifest::load(a / "retained.jsonl");
    std::size_t expected = 0;
    for (const auto& r : retained.records)
        for (int s : c.scales) expected += s <= r.N ? 1 : 0;

    const Manifest m = Manifest::load(a);
    EXPECT_EQ(m.records.size(), expected);
    for (const auto& r : m.records) {
        EXPECT_EQ(r.N, r.scale_s);
        const VideoClip clip = load_record_clip(a, r);
        EXPECT_EQ(clip.num_frames(), r.N);
        EXPECT_FALSE(r.caption.empty());
        EXPECT_FALSE(r.caption_missing);
    }

    const Manifest t = Manifest::load(a / "test");
    EXPECT_EQ(t.records.size(), static_cast<std::size_t>(c.test_videos) * c.scales.size());
    EXPECT_EQ(t.scales(), c.scales);
}

TEST(Pipeline, SeedChangesCorpus) {
    DataConfig c = small_data();
    const fs::path a = temp_dir("seed_a"), b = temp_dir("seed_b");
    stage_synth(c, a);
    c.seed = 6;
    stage_synth(c, b);
    EXPECT_NE(hash_file(a / "raw" / "videos.jsonl"), hash_file(b / "raw" / "videos.jsonl"));
}

}  // namespace
}  // namespace semfi
