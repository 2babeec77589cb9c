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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace semfi {

/// Dense [N, H, W, C] tensor, row-major with channels innermost.
template <class T>
struct Volume {
    int frames = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> data;

    Volume() = default;
    Volume(int n, int h, int w, int c, T fill = T{})
        : frames(n), height(h), width(w), channels(c),
          data(static_cast<std::size_t>(n) * h * w * c, fill) {}

    std::size_t frame_size() const { return static_cast<std::size_t>(height) * width * channels; }
    std::size_t size() const { return data.size(); }

    std::size_t offset(int n, int y, int x, int ch) const {
        return ((static_cast<std::size_t>(n) * height + y) * width + x) * channels + ch;
    }
    T& at(int n, int y, int x, int ch) { return data[offset(n, y, x, ch)]; }
    const T& at(int n, int y, int x, int ch) const { return data[offset(n, y, x, ch)]; }

    std::span<T> frame(int n) { return {data.data() + n * frame_size(), frame_size()}; }
    std::span<const T> frame(int n) const { return {data.data() + n * frame_size(), frame_size()}; }

    bool same_shape(const Volume& o) const {
        return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
    }
};

/// A single H x W x C frame.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
    float at(int y, int x, int ch) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    bool operator==(const Image&) const = default;
};

/// Frame sequence plus playback rate and caption. Frames hold values in [0, 1].
struct VideoClip {
    Volume<float> frames;
    int fps = 24;
    std::string caption;

    int num_frames() const { return frames.frames; }
    int height() const { return frames.height; }
    int width() const { return frames.width; }
    int channels() const { return frames.channels; }

    Image frame(int i) const;
    void set_frame(int i, const Image& img);

    /// Throws ArgumentError unless N >= 2, fps > 0 and all values are finite in [0, 1].
    void validate() const;
};

Image frame_of(const Volume<float>& v, int i);
void set_frame(Volume<float>& v, int i, const Image& img);

/// Rec.601 luma; single-channel images are copied through.
Image to_gray(const Image& img);

/// Box-filter resample to out_h x out_w. Exact block means when the sizes divide.
Image area_resize(const Image& img, int out_h, int out_w);

}  // namespace semfi
