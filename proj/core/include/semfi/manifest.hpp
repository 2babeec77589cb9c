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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace semfi {

struct ManifestRecord {
    std::string clip_id;
    /// Relative to the manifest's directory.
    std::string path;
    int N = 0;
    int H = 0;
    int W = 0;
    int fps = 0;
    std::string caption;
    double S_c = 0.0;
    double S_f = 0.0;
    std::string source_video_id;
    int scale_s = 0;
    int start_frame = 0;
    bool caption_missing = false;

    bool operator==(const ManifestRecord&) const = default;
};

void to_json(nlohmann::json& j, const ManifestRecord& r);
void from_json(const nlohmann::json& j, ManifestRecord& r);

struct Manifest {
    std::vector<ManifestRecord> records;

    void sort();
    /// JSON lines sorted by clip_id; byte-stable for equal content.
    std::string to_jsonl() const;
    static Manifest from_jsonl(const std::string& text);

    /// Writes sorted JSONL. `path` may be a file or a directory (manifest.jsonl).
    void save(const std::filesystem::path& path) const;
    /// DataError when missing, FormatError on malformed lines or duplicate ids.
    static Manifest load(const std::filesystem::path& path);

    std::vector<int> scales() const;
    Manifest with_scales(const std::vector<int>& keep) const;
    std::string checksum() const;
};

}  // namespace semfi
