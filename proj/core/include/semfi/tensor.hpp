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

#include <map>
#include <set>
#include <string>

#include <Eigen/Dense>

namespace semfi {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <class T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Named parameter tensors. std::map keeps references stable and iteration sorted.
template <class T>
using ParamMap = std::map<std::string, Mat<T>>;

/// Gradient accumulator restricted to a set of parameter names.
template <class T>
class Gradients {
public:
    Gradients() = default;
    explicit Gradients(std::set<std::string> wanted) : wanted_(std::move(wanted)) {}

    static Gradients all() {
        Gradients g;
        g.all_ = true;
        return g;
    }

    bool wants(const std::string& name) const { return all_ || wanted_.count(name) > 0; }

    /// Zero-initialised on first use; nullptr when `name` is not tracked.
    Mat<T>* slot(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        if (!wants(name)) return nullptr;
        auto [it, inserted] = values_.try_emplace(name);
        if (inserted) it->second = Mat<T>::Zero(rows, cols);
        return &it->second;
    }

    const ParamMap<T>& values() const { return values_; }
    ParamMap<T>& values() { return values_; }
    void clear() { values_.clear(); }

private:
    bool all_ = false;
    std::set<std::string> wanted_;
    ParamMap<T> values_;
};

template <class T, class U>
Mat<U> cast_mat(const Mat<T>& m) {
    return m.template cast<U>();
}

}  // namespace semfi
