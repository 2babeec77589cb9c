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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace semfi {

/// Lowercase hex SHA-1 of "blob <len>\0" + bytes, as git computes blob ids.
std::string git_blob_hash(std::span<const std::uint8_t> bytes);
std::string git_blob_hash(std::string_view text);
std::string hash_file(const std::filesystem::path& path);

}  // namespace semfi
