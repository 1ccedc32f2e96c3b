// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/feature_map.hpp"

#include <numeric>
#include <string>

#include "tokcompact/error.hpp"

namespace tokcompact {

FeatureMap FeatureMap::from_grid(std::size_t height, std::size_t width, Matrix tokens) {
    if (tokens.rows() != height * width) {
        throw ShapeError("feature map: " + std::to_string(tokens.rows()) + " tokens for a " +
                         std::to_string(height) + "x" + std::to_string(width) + " grid");
    }
    FeatureMap f;
    f.height = height;
    f.width = width;
    f.tokens = std::move(tokens);
    f.positions.reserve(height * width);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c) f.positions.push_back({r, c});
    f.sizes.assign(height * width, 1.0);
    return f;
}

double FeatureMap::total_mass() const noexcept { return std::accumulate(sizes.begin(), sizes.end(), 0.0); }

void FeatureMap::validate() const {
    if (positions.size() != token_count() || sizes.size() != token_count()) {
        throw DataError("feature map: " + std::to_string(token_count()) + " tokens but " +
                        std::to_string(positions.size()) + " positions and " + std::to_string(sizes.size()) +
                        " sizes");
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(sizes[i] >= 1.0)) throw DataError("feature map: token " + std::to_string(i) + " has size < 1");
    }
}

FeatureMap take_tokens(const FeatureMap& f, std::span<const std::size_t> indices) {
    FeatureMap out;
    out.height = f.height;
    out.width = f.width;
    out.tokens = select_rows(f.tokens, indices);
    out.positions.reserve(indices.size());
    out.sizes.reserve(indices.size());
    for (std::size_t idx : indices) {
        out.positions.push_back(f.positions[idx]);
        out.sizes.push_back(f.sizes[idx]);
    }
    return out;
}

FeatureMap concat_tokens(const FeatureMap& a, const FeatureMap& b) {
    FeatureMap out;
    out.height = a.height;
    out.width = a.width;
    out.tokens = vstack(a.tokens, b.tokens);
    out.positions = a.positions;
    out.positions.insert(out.positions.end(), b.positions.begin(), b.positions.end());
    out.sizes = a.sizes;
    out.sizes.insert(out.sizes.end(), b.sizes.begin(), b.sizes.end());
    return out;
}

}  // namespace tokcompact
