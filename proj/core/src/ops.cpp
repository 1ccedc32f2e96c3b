// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tokcompact/error.hpp"

namespace tokcompact {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " * " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_transposed: inner dims " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()));
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void softmax_inplace(std::span<double> v) {
    if (v.empty()) return;
    const double peak = *std::ranges::max_element(v);
    double total = 0.0;
    for (double& x : v) {
        x = std::exp(x - peak);
        total += x;
    }
    for (double& x : v) x /= total;
}

Matrix row_softmax(const Matrix& a) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.rows(); ++i) softmax_inplace(out.row(i));
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Matrix cosine_sim_matrix(const Matrix& x, const Matrix& y) {
    if (x.cols() != y.cols()) {
        throw ShapeError("cosine_sim_matrix: dims " + std::to_string(x.cols()) + " vs " + std::to_string(y.cols()));
    }
    auto norms = [](const Matrix& m, const char* name) {
        std::vector<double> n(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            n[i] = l2_norm(m.row(i));
            if (n[i] == 0.0) {
                throw DegenerateInputError(std::string("cosine_sim_matrix: zero-norm row ") + std::to_string(i) +
                                               " in " + name,
                                           i);
            }
        }
        return n;
    };
    const auto nx = norms(x, "x");
    const auto ny = norms(y, "y");
    Matrix out(x.rows(), y.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < y.rows(); ++j) out(i, j) = dot(x.row(i), y.row(j)) / (nx[i] * ny[j]);
    return out;
}

Matrix rope2d_embed(std::span<const GridPos> positions, std::size_t dim, double base) {
    if (dim == 0 || dim % 4 != 0) {
        throw ShapeError("rope2d_embed: dim " + std::to_string(dim) + " is not divisible by 4");
    }
    const std::size_t half = dim / 2;
    const std::size_t pairs = half / 2;
    std::vector<double> freq(pairs);
    for (std::size_t p = 0; p < pairs; ++p)
        freq[p] = std::pow(base, -2.0 * static_cast<double>(p) / static_cast<double>(half));

    Matrix out(positions.size(), dim);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        auto row = out.row(i);
        const double coords[2] = {static_cast<double>(positions[i].row), static_cast<double>(positions[i].col)};
        for (std::size_t axis = 0; axis < 2; ++axis) {
            for (std::size_t p = 0; p < pairs; ++p) {
                const double angle = coords[axis] * freq[p];
                row[axis * half + 2 * p] = std::sin(angle);
                row[axis * half + 2 * p + 1] = std::cos(angle);
            }
        }
    }
    return out;
}

}  // namespace tokcompact
