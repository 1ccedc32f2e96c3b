// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <span>

#include "tokcompact/matrix.hpp"

namespace tokcompact {

struct GridPos {
    std::size_t row = 0;
    std::size_t col = 0;

    friend auto operator<=>(const GridPos&, const GridPos&) = default;
};

inline constexpr double kRopeBase = 10000.0;

// Serial i-k-j loop; results are bit-identical run to run.
Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T without materialising the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Max-subtracted softmax over each row.
Matrix row_softmax(const Matrix& a);
void softmax_inplace(std::span<double> v);

// result(i, j) = cos(x_i, y_j). Throws DegenerateInputError naming the first zero-norm row.
Matrix cosine_sim_matrix(const Matrix& x, const Matrix& y);

// Axial 2-D rotary embedding. The first dim/2 channels encode the row and the
// rest encode the column, each as interleaved (sin, cos) pairs with
// frequencies base^(-2p / (dim/2)).
Matrix rope2d_embed(std::span<const GridPos> positions, std::size_t dim, double base = kRopeBase);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

}  // namespace tokcompact
