// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tokcompact/hte.hpp"
#include "tokcompact/matrix.hpp"
#include "tokcompact/mke.hpp"

namespace tokcompact::metrics {

inline constexpr std::size_t kPowerIterationCap = 1000;
inline constexpr double kPowerIterationTol = 1e-8;
inline constexpr double kDefaultEpsilon = 0.5;

// Largest squared singular value, by power iteration on the smaller Gram matrix.
double spectral_norm_sq(const Matrix& a, std::uint64_t seed = 0);

// ||A||_F^2 / ||A||_2^2. Zero matrix -> DegenerateInputError.
double stable_rank(const Matrix& a, std::uint64_t seed = 0);

// 1/2 logdet(I_d + d/(n eps^2) A^T A) for n tokens of dimension d.
double coding_rate(const Matrix& a, double eps = kDefaultEpsilon);

struct DensityRow {
    std::size_t layer = 0;
    double stable_rank = 0.0;
    double coding_rate = 0.0;
    std::size_t tokens = 0;
};

struct DensityProfile {
    std::vector<DensityRow> per_layer;
};

// Empty token sets yield a zero row.
DensityRow density_row(std::size_t layer, const Matrix& tokens, double eps = kDefaultEpsilon,
                       std::uint64_t seed = 0);

struct FlopsLayer {
    std::size_t layer = 0;
    std::size_t visual = 0;
    std::size_t text = 0;
    double attention = 0.0;
    double ffn = 0.0;
    double expert = 0.0;
    double router = 0.0;

    double total() const noexcept { return attention + ffn + expert + router; }
};

struct FlopsReport {
    std::vector<FlopsLayer> per_layer;
    double total_g = 0.0;
    double token_ratio_final = 0.0;  // visual tokens at the last layer over the first
};

// Per layer with n = visual + text tokens:
//   attention 4nD^2 + 2n^2D, dense FFN 4nD*ffn, visual experts 4 n_vis topk D expert_ffn,
//   router 2 n_vis D N.
FlopsReport flops_estimate(const hte::LlmShape& shape, std::span<const std::size_t> visual_counts,
                           std::size_t n_text);

struct TokenSchedule {
    std::size_t base_tokens = 0;
    std::size_t start_count = 0;             // tokens leaving the fusion stage
    std::vector<std::size_t> layer_counts;   // tokens entering each layer
    std::size_t final_count = 0;             // tokens leaving the last layer
    double start_ratio = 0.0;
    double final_ratio = 0.0;
};

// Analytic token trajectory: the fusion stage count for two branches of
// `base_tokens`, then floor(d*n) removals at every pruning layer. A start ratio
// overrides the fusion stage with floor(ratio * base_tokens). Threshold pruning
// has no analytic count and is rejected.
TokenSchedule token_schedule(const mke::MkeConfig& mke_cfg, const hte::HteConfig& hte_cfg,
                             const hte::LlmShape& shape, std::size_t base_tokens,
                             std::optional<double> start_ratio = std::nullopt);

}  // namespace tokcompact::metrics
