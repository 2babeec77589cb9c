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

#include "semfi/text_encoder.hpp"

#include <cctype>
#include <cmath>

#include "semfi/errors.hpp"
#include "semfi/rng.hpp"

namespace semfi {

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

TextEncoder::TextEncoder(int dim, int buckets, int max_tokens, std::uint64_t seed)
    : dim_(dim), buckets_(buckets), max_tokens_(max_tokens) {
    if (dim <= 0 || buckets <= 0 || max_tokens < 1) throw ConfigError("text encoder dims must be positive");
    Rng rng = Rng(seed).split("text_table");
    table_.resize(static_cast<std::size_t>(buckets) * dim);
    const double std = 1.0 / std::sqrt(static_cast<double>(dim));
    for (auto& v : table_) v = static_cast<float>(rng.normal(0.0, std));
}

TextEmbedding TextEncoder::encode(const std::string& text) const {
    TextEmbedding out;
    out.source_text = text;
    const auto words = tokenize_words(text);
    std::vector<float> pooled(dim_, 0.0f);
    if (words.empty()) {
        out.tokens.push_back(pooled);
        return out;
    }
    for (const auto& w : words) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : w) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        const float* row = table_.data() + (h % static_cast<std::uint64_t>(buckets_)) * dim_;
        if (static_cast<int>(out.tokens.size()) < max_tokens_ - 1) out.tokens.emplace_back(row, row + dim_);
        for (int d = 0; d < dim_; ++d) pooled[d] += row[d];
    }
    for (auto& v : pooled) v /= static_cast<float>(words.size());
    out.tokens.push_back(std::move(pooled));
    return out;
}

}  // namespace semfi
