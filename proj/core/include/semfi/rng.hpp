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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace semfi {

/// Counter-based random stream.
///
/// A stream is identified by a 64-bit key; the n-th draw is a pure function
/// of (key, n). Child streams are derived with `split`, so every random
/// decision in a run can be traced back to the root seed and a tag path.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Derive an independent child stream. Does not advance this stream.
    [[nodiscard]] Rng split(std::uint64_t tag) const {
        Rng child;
        child.key_ = mix(key_ ^ mix(tag + 0x632be59bd9b4e019ULL));
        return child;
    }

    [[nodiscard]] Rng split(std::string_view tag) const {
        // FNV-1a over the tag bytes
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : tag) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        return split(h);
    }

    std::uint64_t next_u64() { return mix(key_ + mix(counter_++)); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next_u64() % span);
    }

    /// Standard normal via Box-Muller; one value per call.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace semfi
