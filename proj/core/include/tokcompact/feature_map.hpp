// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tokcompact/matrix.hpp"
#include "tokcompact/ops.hpp"

namespace tokcompact {

// A set of token vectors laid out on (or derived from) a 2-D grid.
//
// `sizes` holds the merge mass of each token: the number of original grid
// tokens it stands for. Every merge conserves the total mass.
struct FeatureMap {
    std::size_t height = 0;
    std::size_t width = 0;
    Matrix tokens;
    std::vector<GridPos> positions;
    std::vector<double> sizes;

    // Grid-shaped map, positions filled row-major, unit sizes.
    static FeatureMap from_grid(std::size_t height, std::size_t width, Matrix tokens);

    std::size_t token_count() const noexcept { return tokens.rows(); }
    std::size_t dim() const noexcept { return tokens.cols(); }
    bool is_grid() const noexcept { return token_count() == height * width; }
    double total_mass() const noexcept;

    // Throws DataError when the per-token arrays disagree or a size is < 1.
    void validate() const;
};

FeatureMap take_tokens(const FeatureMap& f, std::span<const std::size_t> indices);
// Tokens of `a` followed by tokens of `b`; grid extents are taken from `a`.
FeatureMap concat_tokens(const FeatureMap& a, const FeatureMap& b);

}  // namespace tokcompact
