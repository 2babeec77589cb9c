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

#include "semfi/hash.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <vector>

#include "semfi/errors.hpp"

namespace semfi {

std::string git_blob_hash(std::span<const std::uint8_t> bytes) {
    const std::string prefix = "blob " + std::to_string(bytes.size()) + '\0';
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                    EVP_DigestUpdate(ctx, prefix.data(), prefix.size()) &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("SHA-1 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        const unsigned char b = digest[i];
        out += kHex[b >> 4];
        out += kHex[b & 15];
    }
    return out;
}

std::string git_blob_hash(std::string_view text) {
    return git_blob_hash(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return git_blob_hash(bytes);
}

}  // namespace semfi
