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

#include "semfi/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace semfi {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 2) throw ArgumentError("noise schedule needs at least 2 steps");
    if (!(beta_start > 0.0 && beta_end >= beta_start && beta_end < 1.0))
        throw ArgumentError("beta range must satisfy 0 < start <= end < 1");
    NoiseSchedule s;
    s.betas_.resize(steps);
    s.alpha_bars_.resize(steps);
    double prod = 1.0;
    for (int t = 0; t < steps; ++t) {
        const double b = beta_start + (beta_end - beta_start) * t / (steps - 1);
        s.betas_[t] = b;
        prod *= 1.0 - b;
        s.alpha_bars_[t] = prod;
    }
    return s;
}

std::vector<int> NoiseSchedule::respaced(int count) const {
    count = std::clamp(count, 1, steps());
    std::vector<int> ts;
    ts.reserve(count);
    for (int i = count - 1; i >= 0; --i) {
        const double pos = count == 1 ? steps() - 1 : static_cast<double>(i) * (steps() - 1) / (count - 1);
        ts.push_back(static_cast<int>(std::lround(pos)));
    }
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

}  // namespace semfi
