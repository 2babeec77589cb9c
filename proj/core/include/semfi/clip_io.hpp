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
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semfi/video.hpp"

namespace semfi {

enum class ClipDtype { uint8, float32 };

ClipDtype parse_clip_dtype(const std::string& s);
std::string to_string(ClipDtype d);

struct StoredClip {
    VideoClip clip;
    ClipDtype dtype = ClipDtype::uint8;
    /// Free-form header extras (synth metadata, routed expert, ...).
    nlohmann::json meta = nlohmann::json::object();
};

/// Container: "SEMFICLP", u64 LE header length, JSON header
/// {N, H, W, C, dtype, fps, caption, meta}, then the row-major frame blob.
/// uint8 storage rounds to the nearest 1/255.
std::vector<std::uint8_t> encode_clip(const VideoClip& clip, ClipDtype dtype,
                                      const nlohmann::json& meta = nlohmann::json::object());
StoredClip decode_clip(const std::vector<std::uint8_t>& bytes);

void write_clip(const std::filesystem::path& path, const VideoClip& clip, ClipDtype dtype,
                const nlohmann::json& meta = nlohmann::json::object());
/// FormatError naming the offending header field; DataError if unreadable.
StoredClip read_clip(const std::filesystem::path& path);

/// PNG, binary/ASCII PPM (P6/P3) or PGM (P5/P2); values scaled to [0,1].
Image read_image(const std::filesystem::path& path);
/// PNG when the extension is .png, otherwise binary PPM/PGM.
void write_image(const std::filesystem::path& path, const Image& img);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Little-endian helpers shared by the binary containers.
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
std::uint64_t get_u64(const std::uint8_t* p);

}  // namespace semfi
