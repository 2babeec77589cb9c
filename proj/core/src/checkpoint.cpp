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

#include "semfi/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "semfi/clip_io.hpp"
#include "semfi/errors.hpp"

namespace semfi {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'F', 'I', 'C', 'K', 'P'};

void append_tensor(nlohmann::json& manifest, std::vector<std::uint8_t>& blob, const std::string& name,
                   const Mat<float>& m) {
    static_assert(std::endian::native == std::endian::little);
    manifest.push_back({{"name", name},
                        {"shape", {m.rows(), m.cols()}},
                        {"dtype", "float32"},
                        {"offset", blob.size()}});
    const auto* p = reinterpret_cast<const std::uint8_t*>(m.data());
    blob.insert(blob.end(), p, p + m.size() * sizeof(float));
}

const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw FormatError("checkpoint field '" + where + key + "' is missing");
    return j.at(key);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Denoiser<float>& model, const MoLState* mol,
                                            const MoLConfig& mol_config, const nlohmann::json& extra) {
    nlohmann::json manifest = nlohmann::json::array();
    std::vector<std::uint8_t> blob;
    for (const auto& [name, m] : model.params()) append_tensor(manifest, blob, name, m);
    if (mol)
        for (const auto& name : mol->parameter_names()) append_tensor(manifest, blob, name, mol->parameter(name));

    nlohmann::json h;
    h["format"] = kCheckpointFormat;
    h["version"] = kCheckpointVersion;
    h["config"] = {{"model", model.config()}, {"mol", mol_config}, {"has_mol", mol != nullptr}};
    h["params"] = manifest;
    h["extra"] = extra;
    const std::string header = h.dump();

    std::vector<std::uint8_t> out(kMagic, kMagic + 8);
    put_u64(out, header.size());
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), blob.begin(), blob.end());
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw FormatError("checkpoint field 'magic' is invalid (not a checkpoint container)");
    const std::uint64_t hlen = get_u64(bytes.data() + 8);
    if (hlen > bytes.size() - 16) throw FormatError("checkpoint field 'header_length' exceeds the file size");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint field 'header' is not valid JSON: ") + e.what());
    }
    if (require(h, "format", "") != kCheckpointFormat) throw FormatError("checkpoint field 'format' is not semfi.checkpoint");
    if (require(h, "version", "") != kCheckpointVersion)
        throw FormatError("checkpoint field 'version' is unsupported: " + h["version"].dump());

    Checkpoint ck;
    const auto& config = require(h, "config", "");
    try {
        ck.model = require(config, "model", "config.").get<DenoiserConfig>();
        ck.mol_config = require(config, "mol", "config.").get<MoLConfig>();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint field 'config' is invalid: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint field 'config' is invalid: ") + e.what());
    }
    const bool has_mol = require(config, "has_mol", "config.").get<bool>();
    ck.extra = h.value("extra", nlohmann::json::object());

    const std::size_t base = 16 + hlen;
    const std::size_t blob_size = bytes.size() - base;
    const auto& params = require(h, "params", "");
    if (!params.is_array()) throw FormatError("checkpoint field 'params' is not an array");
    std::map<std::string, Mat<float>> adapters;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string where = "params[" + std::to_string(i) + "].";
        const auto& e = params[i];
        const auto name = require(e, "name", where).get<std::string>();
        if (require(e, "dtype", where) != "float32") throw FormatError("checkpoint field '" + where + "dtype' must be float32");
        const auto& shape = require(e, "shape", where);
        if (!shape.is_array() || shape.size() != 2) throw FormatError("checkpoint field '" + where + "shape' must be [rows, cols]");
        const auto rows = shape[0].get<std::int64_t>(), cols = shape[1].get<std::int64_t>();
        const auto offset = require(e, "offset", where).get<std::uint64_t>();
        if (rows < 0 || cols < 0) throw FormatError("checkpoint field '" + where + "shape' is negative");
        const std::size_t nbytes = static_cast<std::size_t>(rows * cols) * sizeof(float);
        if (offset > blob_size || nbytes > blob_size - offset)
            throw FormatError("checkpoint field '" + where + "offset' points past the end of the file");
        Mat<float> m(rows, cols);
        std::memcpy(m.data(), bytes.data() + base + offset, nbytes);
        if (name.rfind("mol/", 0) == 0) adapters.emplace(name, std::move(m));
        else ck.base.emplace(name, std::move(m));
    }

    Denoiser<float> model(ck.model, ck.base);  // validates base tensors
    if (has_mol) {
        MoLState mol = init_mol<float>(model.lora_layers(), ck.mol_config, 0);
        const auto names = mol.parameter_names();
        if (names.size() != adapters.size())
            throw FormatError("checkpoint field 'params' holds " + std::to_string(adapters.size()) +
                              " adapter tensors, config implies " + std::to_string(names.size()));
        for (const auto& name : names) {
            const auto it = adapters.find(name);
            if (it == adapters.end()) throw FormatError("checkpoint field 'params' is missing adapter '" + name + "'");
            Mat<float>& dst = mol.parameter(name);
            if (dst.rows() != it->second.rows() || dst.cols() != it->second.cols())
                throw FormatError("checkpoint field 'params' has wrong shape for '" + name + "'");
            dst = it->second;
        }
        ck.mol = std::move(mol);
    } else if (!adapters.empty()) {
        throw FormatError("checkpoint field 'config.has_mol' is false but adapter tensors are present");
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Denoiser<float>& model, const MoLState* mol,
                     const MoLConfig& mol_config, const nlohmann::json& extra) {
    write_bytes(path, encode_checkpoint(model, mol, mol_config, extra));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace semfi
