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
#include <string>
#include <vector>

namespace semfi {

struct TextEmbedding {
    /// One vector per kept word followed by the mean-pooled token.
    std::vector<std::vector<float>> tokens;
    std::string source_text;

    int dim() const { return tokens.empty() ? 0 : static_cast<int>(tokens.front().size()); }
};

/// Lowercased alphanumeric words, in order.
std::vector<std::string> tokenize_words(const std::string& text);

/// Hashed bag-of-words text tower: word -> bucket -> frozen seeded table row.
///
/// Deterministic in (text, dim, buckets, max_tokens, seed). Empty text yields a
/// single all-zero token, which doubles as the unconditional embedding.
class TextEncoder {
public:
    TextEncoder(int dim, int buckets, int max_tokens, std::uint64_t seed);

    TextEmbedding encode(const std::string& text) const;

    int dim() const { return dim_; }
    int max_tokens() const { return max_tokens_; }

private:
    int dim_;
    int buckets_;
    int max_tokens_;
    std::vector<float> table_;
};

}  // namespace semfi
