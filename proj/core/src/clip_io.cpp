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

#include "semfi/clip_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "semfi/errors.hpp"

namespace semfi {

namespace {

constexpr char kClipMagic[8] = {'S', 'E', 'M', 'F', 'I', 'C', 'L', 'P'};

template <class V>
V field(const nlohmann::json& j, const char* key, const std::string& what) {
    if (!j.contains(key)) throw FormatError(what + " header is missing field '" + key + "'");
    try {
        return j.at(key).get<V>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(what + " header field '" + std::string(key) + "' has the wrong type");
    }
}

std::uint8_t quantize(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

ClipDtype parse_clip_dtype(const std::string& s) {
    if (s == "uint8") return ClipDtype::uint8;
    if (s == "float32") return ClipDtype::float32;
    throw FormatError("unknown clip dtype '" + s + "'");
}

std::string to_string(ClipDtype d) { return d == ClipDtype::uint8 ? "uint8" : "float32"; }

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::vector<std::uint8_t> encode_clip(const VideoClip& clip, ClipDtype dtype, const nlohmann::json& meta) {
    clip.validate();
    nlohmann::json h;
    h["N"] = clip.num_frames();
    h["H"] = clip.height();
    h["W"] = clip.width();
    h["C"] = clip.channels();
    h["dtype"] = to_string(dtype);
    h["fps"] = clip.fps;
    h["caption"] = clip.caption;
    h["meta"] = meta;
    const std::string header = h.dump();

    std::vector<std::uint8_t> out(kClipMagic, kClipMagic + 8);
    put_u64(out, header.size());
    out.insert(out.end(), header.begin(), header.end());
    const auto& d = clip.frames.data;
    if (dtype == ClipDtype::uint8) {
        for (float v : d) out.push_back(quantize(v));
    } else {
        static_assert(std::endian::native == std::endian::little);
        const auto* p = reinterpret_cast<const std::uint8_t*>(d.data());
        out.insert(out.end(), p, p + d.size() * sizeof(float));
    }
    return out;
}

StoredClip decode_clip(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kClipMagic, 8) != 0)
        throw FormatError("not a clip container (bad magic)");
    const std::uint64_t hlen = get_u64(bytes.data() + 8);
    if (hlen > bytes.size() - 16) throw FormatError("clip header length exceeds file size");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("clip header is not valid JSON: ") + e.what());
    }
    const int n = field<int>(h, "N", "clip"), H = field<int>(h, "H", "clip"), W = field<int>(h, "W", "clip"),
              C = field<int>(h, "C", "clip");
    if (n < 1 || H < 1 || W < 1 || C < 1) throw FormatError("clip header has a non-positive dimension");
    StoredClip sc;
    sc.dtype = parse_clip_dtype(field<std::string>(h, "dtype", "clip"));
    sc.clip.fps = field<int>(h, "fps", "clip");
    sc.clip.caption = h.value("caption", "");
    sc.meta = h.value("meta", nlohmann::json::object());
    sc.clip.frames = Volume<float>(n, H, W, C);
    auto& d = sc.clip.frames.data;
    const std::size_t elem = sc.dtype == ClipDtype::uint8 ? 1 : 4;
    const std::size_t offset = 16 + hlen;
    if (bytes.size() - offset != d.size() * elem)
        throw FormatError("clip blob holds " + std::to_string(bytes.size() - offset) + " bytes, header implies " +
                          std::to_string(d.size() * elem));
    if (sc.dtype == ClipDtype::uint8) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(bytes[offset + i]) / 255.0f;
    } else {
        std::memcpy(d.data(), bytes.data() + offset, d.size() * sizeof(float));
    }
    return sc;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + path.string());
}

void write_clip(const std::filesystem::path& path, const VideoClip& clip, ClipDtype dtype, const nlohmann::json& meta) {
    write_bytes(path, encode_clip(clip, dtype, meta));
}

StoredClip read_clip(const std::filesystem::path& path) {
    try {
        return decode_clip(read_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

namespace {

Image read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw FormatError(path.string() + ": " + png.message);
    const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
    png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr))
        throw FormatError(path.string() + ": " + png.message);
    Image img(static_cast<int>(png.height), static_cast<int>(png.width), gray ? 1 : 3);
    for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = static_cast<float>(buf[i]) / 255.0f;
    return img;
}

Image read_pnm(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    std::size_t pos = 0;
    const auto token = [&]() {
        std::string t;
        while (pos < bytes.size()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                ++pos;
            } else {
                t += c;
                ++pos;
            }
        }
        if (t.empty()) throw FormatError(path.string() + ": truncated PNM header");
        return t;
    };
    const std::string magic = token();
    int channels = 0;
    bool binary = false;
    if (magic == "P6" || magic == "P3") channels = 3;
    else if (magic == "P5" || magic == "P2") channels = 1;
    else throw FormatError(path.string() + ": unsupported image format '" + magic + "'");
    binary = magic == "P6" || magic == "P5";
    const int w = std::stoi(token()), h = std::stoi(token()), maxval = std::stoi(token());
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw FormatError(path.string() + ": unsupported PNM geometry");
    Image img(h, w, channels);
    if (binary) {
        ++pos;
        if (bytes.size() - pos < img.size()) throw FormatError(path.string() + ": truncated PNM data");
        for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<float>(bytes[pos + i]) / maxval;
    } else {
        for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<float>(std::stoi(token())) / maxval;
    }
    return img;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("image not found: " + path.string());
    return path.extension() == ".png" ? read_png(path) : read_pnm(path);
}

void write_image(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3) throw ArgumentError("only 1- or 3-channel images can be written");
    std::vector<std::uint8_t> px(img.size());
    std::transform(img.data.begin(), img.data.end(), px.begin(), quantize);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (path.extension() == ".png") {
        png_image png;
        std::memset(&png, 0, sizeof png);
        png.version = PNG_IMAGE_VERSION;
        png.width = static_cast<png_uint_32>(img.width);
        png.height = static_cast<png_uint_32>(img.height);
        png.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
        if (!png_image_write_to_file(&png, path.c_str(), 0, px.data(), 0, nullptr))
            throw DataError(path.string() + ": " + png.message);
        return;
    }
    std::ostringstream head;
    head << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
    const std::string hs = head.str();
    std::vector<std::uint8_t> out(hs.begin(), hs.end());
    out.insert(out.end(), px.begin(), px.end());
    write_bytes(path, out);
}

}  // namespace semfi
