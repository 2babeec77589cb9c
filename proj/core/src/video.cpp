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

#include "semfi/video.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "semfi/errors.hpp"

namespace semfi {

Image frame_of(const Volume<float>& v, int i) {
    if (i < 0 || i >= v.frames) throw RangeError("frame index " + std::to_string(i) + " out of range");
    Image img(v.height, v.width, v.channels);
    auto src = v.frame(i);
    std::copy(src.begin(), src.end(), img.data.begin());
    return img;
}

void set_frame(Volume<float>& v, int i, const Image& img) {
    if (i < 0 || i >= v.frames) throw RangeError("frame index " + std::to_string(i) + " out of range");
    if (img.height != v.height || img.width != v.width || img.channels != v.channels)
        throw ShapeError("frame shape does not match volume");
    std::copy(img.data.begin(), img.data.end(), v.frame(i).begin());
}

Image VideoClip::frame(int i) const { return frame_of(frames, i); }

void VideoClip::set_frame(int i, const Image& img) { semfi::set_frame(frames, i, img); }

void VideoClip::validate() const {
    if (frames.frames < 2) throw ArgumentError("clip needs at least 2 frames");
    if (frames.height <= 0 || frames.width <= 0 || frames.channels <= 0)
        throw ArgumentError("clip has empty spatial dims");
    if (fps <= 0) throw ArgumentError("fps must be positive");
    for (float v : frames.data) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
            throw ArgumentError("clip values must be finite and within [0,1]");
    }
}

Image to_gray(const Image& img) {
    if (img.channels == 1) return img;
    Image out(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (img.channels >= 3) {
                out.at(y, x, 0) = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
            } else {
                float s = 0.0f;
                for (int c = 0; c < img.channels; ++c) s += img.at(y, x, c);
                out.at(y, x, 0) = s / static_cast<float>(img.channels);
            }
        }
    }
    return out;
}

Image area_resize(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ArgumentError("area_resize target must be positive");
    Image out(out_h, out_w, img.channels);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        const double y0 = oy * sy, y1 = (oy + 1) * sy;
        for (int ox = 0; ox < out_w; ++ox) {
            const double x0 = ox * sx, x1 = (ox + 1) * sx;
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0, wsum = 0.0;
                for (int y = static_cast<int>(std::floor(y0)); y < std::min<int>(img.height, static_cast<int>(std::ceil(y1))); ++y) {
                    const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                    if (wy <= 0) continue;
                    for (int x = static_cast<int>(std::floor(x0)); x < std::min<int>(img.width, static_cast<int>(std::ceil(x1))); ++x) {
                        const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                        if (wx <= 0) continue;
                        acc += wy * wx * img.at(y, x, c);
                        wsum += wy * wx;
                    }
                }
                out.at(oy, ox, c) = static_cast<float>(acc / wsum);
            }
        }
    }
    return out;
}

}  // namespace semfi
