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
#include <optional>

#include <nlohmann/json.hpp>

#include "semfi/config.hpp"
#include "semfi/denoiser.hpp"
#include "semfi/lora.hpp"

namespace semfi {

inline constexpr const char* kCheckpointFormat = "semfi.checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    DenoiserConfig model;
    MoLConfig mol_config;
    ParamMap<float> base;
    std::optional<MoLState> mol;
    nlohmann::json extra = nlohmann::json::object();

    Denoiser<float> denoiser() const { return Denoiser<float>(model, base); }
};

/// "SEMFICKP", u64 LE header length, JSON header {format, version, config,
/// params: [{name, shape, dtype, offset}], extra}, then float32 LE blobs in
/// manifest order. Adapters live under "mol/universal/..." and "mol/expert_<s>/...".
std::vector<std::uint8_t> encode_checkpoint(const Denoiser<float>& model, const MoLState* mol,
                                            const MoLConfig& mol_config,
                                            const nlohmann::json& extra = nlohmann::json::object());
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Denoiser<float>& model, const MoLState* mol,
                     const MoLConfig& mol_config, const nlohmann::json& extra = nlohmann::json::object());
/// FormatError naming the offending field.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace semfi
