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
#include <span>
#include <vector>

#include "semfi/errors.hpp"

namespace semfi {

/// Discrete DDPM noise ladder, stored in double precision.
///
/// x_t = signal(t) * x_0 + noise(t) * eps, with signal(t) = sqrt(alpha_bar_t).
class NoiseSchedule {
public:
    /// Linear betas from beta_start to beta_end over `steps` levels.
    static NoiseSchedule linear(int steps, double beta_start, double beta_end);

    int steps() const { return static_cast<int>(betas_.size()); }
    double beta(int t) const { return betas_[check(t)]; }
    double alpha_bar(int t) const { return alpha_bars_[check(t)]; }
    double signal(int t) const { return std::sqrt(alpha_bars_[check(t)]); }
    double noise(int t) const { return std::sqrt(1.0 - alpha_bars_[check(t)]); }

    /// Forward-noise: out = signal*x0 + noise*eps.
    template <class T>
    void add_noise(std::span<const T> x0, std::span<const T> eps, int t, std::span<T> out) const {
        const T a = static_cast<T>(signal(t)), b = static_cast<T>(noise(t));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    }

    /// Invert add_noise given the true (or predicted) noise.
    template <class T>
    void x0_from_eps(std::span<const T> xt, std::span<const T> eps, int t, std::span<T> out) const {
        const double a = signal(t), b = noise(t);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<T>((static_cast<double>(xt[i]) - b * static_cast<double>(eps[i])) / a);
    }

    /// v = signal*eps - noise*x0
    template <class T>
    void velocity(std::span<const T> x0, std::span<const T> eps, int t, std::span<T> out) const {
        const T a = static_cast<T>(signal(t)), b = static_cast<T>(noise(t));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * eps[i] - b * x0[i];
    }

    /// Recover (x0, eps) from a velocity prediction.
    template <class T>
    void split_velocity(std::span<const T> xt, std::span<const T> v, int t, std::span<T> x0, std::span<T> eps) const {
        const double a = signal(t), b = noise(t);
        for (std::size_t i = 0; i < xt.size(); ++i) {
            const double x = xt[i], vv = v[i];
            x0[i] = static_cast<T>(a * x - b * vv);
            eps[i] = static_cast<T>(b * x + a * vv);
        }
    }

    /// Evenly spaced, strictly decreasing subset of timesteps ending at 0.
    std::vector<int> respaced(int count) const;

private:
    int check(int t) const {
        if (t < 0 || t >= steps()) throw RangeError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + ")");
        return t;
    }

    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
};

}  // namespace semfi
