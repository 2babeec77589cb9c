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

#include "semfi/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "semfi/errors.hpp"
#include "semfi/hash.hpp"

namespace semfi {

void to_json(nlohmann::json& j, const ManifestRecord& r) {
    j = {{"clip_id", r.clip_id},   {"path", r.path},
         {"N", r.N},               {"H", r.H},
         {"W", r.W},               {"fps", r.fps},
         {"caption", r.caption},   {"S_c", r.S_c},
         {"S_f", r.S_f},           {"source_video_id", r.source_video_id},
         {"scale_s", r.scale_s},   {"start_frame", r.start_frame},
         {"caption_missing", r.caption_missing}};
}

void from_json(const nlohmann::json& j, ManifestRecord& r) {
    r.clip_id = j.at("clip_id").get<std::string>();
    r.path = j.at("path").get<std::string>();
    r.N = j.at("N").get<int>();
    r.H = j.at("H").get<int>();
    r.W = j.at("W").get<int>();
    r.fps = j.at("fps").get<int>();
    r.caption = j.value("caption", "");
    r.S_c = j.value("S_c", 0.0);
    r.S_f = j.value("S_f", 0.0);
    r.source_video_id = j.value("source_video_id", "");
    r.scale_s = j.value("scale_s", r.N);
    r.start_frame = j.value("start_frame", 0);
    r.caption_missing = j.value("caption_missing", false);
}

void Manifest::sort() {
    std::sort(records.begin(), records.end(),
              [](const ManifestRecord& a, const ManifestRecord& b) { return a.clip_id < b.clip_id; });
}

std::string Manifest::to_jsonl() const {
    Manifest m = *this;
    m.sort();
    std::string out;
    for (const auto& r : m.records) out += nlohmann::json(r).dump() + "\n";
    return out;
}

Manifest Manifest::from_jsonl(const std::string& text) {
    Manifest m;
    std::istringstream in(text);
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto r = nlohmann::json::parse(line).get<ManifestRecord>();
            if (!seen.insert(r.clip_id).second) throw FormatError("duplicate clip_id '" + r.clip_id + "'");
            m.records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    m.sort();
    return m;
}

void Manifest::save(const std::filesystem::path& path) const {
    const auto file = std::filesystem::is_directory(path) ? path / "manifest.jsonl" : path;
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write manifest " + file.string());
    out << to_jsonl();
}

Manifest Manifest::load(const std::filesystem::path& path) {
    const auto file = std::filesystem::is_directory(path) ? path / "manifest.jsonl" : path;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("manifest not found: " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_jsonl(ss.str());
}

std::vector<int> Manifest::scales() const {
    std::set<int> s;
    for (const auto& r : records) s.insert(r.scale_s);
    return {s.begin(), s.end()};
}

Manifest Manifest::with_scales(const std::vector<int>& keep) const {
    Manifest m;
    for (const auto& r : records)
        if (std::find(keep.begin(), keep.end(), r.scale_s) != keep.end()) m.records.push_back(r);
    return m;
}

std::string Manifest::checksum() const { return git_blob_hash(to_jsonl()); }

}  // namespace semfi
