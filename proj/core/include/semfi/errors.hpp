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

#include <stdexcept>
#include <string>

namespace semfi {

/// Root of every exception thrown by semfi.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (bad patch size, empty expert set, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor shapes that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A function argument outside its documented domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// An index or scalar outside its valid range (e.g. a diffusion timestep).
class RangeError : public Error {
public:
    using Error::Error;
};

/// Malformed file container or manifest.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Missing or unusable data (missing files, missing scales, empty sets).
class DataError : public Error {
public:
    using Error::Error;
};

/// Two clip sets that cannot be paired frame by frame.
class PairingError : public ShapeError {
public:
    using ShapeError::ShapeError;
};

/// A training batch that mixes frame counts.
class BatchError : public Error {
public:
    using Error::Error;
};

/// Feature vectors with zero norm where a direction is required.
class DegenerateFeatureError : public Error {
public:
    using Error::Error;
};

/// Not enough samples to form the requested statistic.
class StatisticsError : public Error {
public:
    using Error::Error;
};

/// A pluggable component that is declared but not configured.
class NotConfiguredError : public Error {
public:
    using Error::Error;
};

}  // namespace semfi
