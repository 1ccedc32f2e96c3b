// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/metrics.hpp"

#include <cmath>
#include <string>

#include "tokcompact/error.hpp"
#include "tokcompact/ops.hpp"
#include "tokcompact/rng.hpp"
#include "tokcompact/streams.hpp"

namespace tokcompact::metrics {

namespace {

double frobenius_sq(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return s;
}

void require_finite(const Matrix& a, const char* what) {
    const auto d = a.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i])) throw DataError(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
}

std::vector<double> mat_vec(const Matrix& m, std::span<const double> v) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v);
    return out;
}

}  // namespace

double spectral_norm_sq(const Matrix& a, std::uint64_t seed) {
    require_finite(a, "spectral_norm_sq");
    if (a.empty() || frobenius_sq(a) == 0.0) throw DegenerateInputError("spectral_norm_sq: zero matrix", 0);

    // Work with whichever of A^T A and A A^T is smaller; `side` maps v to A v or A^T v.
    const bool cols_side = a.cols() <= a.rows();
    const Matrix at = transpose(a);
    const Matrix& side = cols_side ? a : at;
    const Matrix gram = cols_side ? matmul(at, a) : matmul(a, at);

    Rng rng(seed, streams::kPowerIteration);
    std::vector<double> v(gram.rows());
    for (double& x : v) x = rng.normal();

    auto rayleigh = [&](const std::vector<double>& x) {
        const std::vector<double> y = mat_vec(side, x);
        return dot(y, y) / dot(x, x);
    };

    double lambda = 0.0;
    for (std::size_t it = 0; it < kPowerIterationCap; ++it) {
        const double n = l2_norm(v);
        if (n == 0.0) break;
        for (double& x : v) x /= n;
        std::vector<double> gv = mat_vec(gram, v);
        lambda = rayleigh(v);
        double res = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) res += (gv[i] - lambda * v[i]) * (gv[i] - lambda * v[i]);
        if (std::sqrt(res) <= kPowerIterationTol * lambda) break;
        v = std::move(gv);
    }
    return lambda;
}

double stable_rank(const Matrix& a, std::uint64_t seed) {
    const double sigma_sq = spectral_norm_sq(a, seed);
    return frobenius_sq(a) / sigma_sq;
}

double coding_rate(const Matrix& a, double eps) {
    if (!(eps > 0.0)) throw ConfigError("coding_rate: eps must be positive");
    require_finite(a, "coding_rate");
    const std::size_t n = a.rows();
    const std::size_t d = a.cols();
    if (n == 0) throw DegenerateInputError("coding_rate: no tokens", 0);

    const double scale = static_cast<double>(d) / (static_cast<double>(n) * eps * eps);
    Matrix m = matmul(transpose(a), a);
    for (double& v : m.data()) v *= scale;
    for (std::size_t i = 0; i < d; ++i) m(i, i) += 1.0;

    // Cholesky, lower triangle in place.
    double logdet = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double diag = m(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= m(j, k) * m(j, k);
        if (!(diag > 0.0)) throw DegenerateInputError("coding_rate: factorisation lost positive definiteness", j);
        const double ljj = std::sqrt(diag);
        m(j, j) = ljj;
        logdet += 2.0 * std::log(ljj);
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
            m(i, j) = s / ljj;
        }
    }
    return 0.5 * logdet;
}

DensityRow density_row(std::size_t layer, const Matrix& tokens, double eps, std::uint64_t seed) {
    DensityRow row{.layer = layer, .tokens = tokens.rows()};
    if (tokens.rows() == 0) return row;
    row.coding_rate = coding_rate(tokens, eps);
    row.stable_rank = frobenius_sq(tokens) == 0.0 ? 0.0 : stable_rank(tokens, seed);
    return row;
}

FlopsReport flops_estimate(const hte::LlmShape& shape, std::span<const std::size_t> visual_counts,
                           std::size_t n_text) {
    shape.validate();
    if (visual_counts.size() != shape.n_layers) {
        throw ShapeError("flops_estimate: " + std::to_string(visual_counts.size()) + " layer counts for " +
                         std::to_string(shape.n_layers) + " layers");
    }
    const double D = static_cast<double>(shape.hidden_dim);
    FlopsReport report;
    double total = 0.0;
    for (std::size_t l = 0; l < shape.n_layers; ++l) {
        const double nv = static_cast<double>(visual_counts[l]);
        const double n = nv + static_cast<double>(n_text);
        FlopsLayer row{.layer = l, .visual = visual_counts[l], .text = n_text};
        row.attention = 4.0 * n * D * D + 2.0 * n * n * D;
        row.ffn = 4.0 * n * D * static_cast<double>(shape.ffn_dim);
        row.expert = 4.0 * nv * static_cast<double>(shape.router_topk) * D * static_cast<double>(shape.expert_ffn_dim);
        row.router = 2.0 * nv * D * static_cast<double>(shape.n_visual_experts);
        total += row.total();
        report.per_layer.push_back(row);
    }
    report.total_g = total / 1e9;
    report.token_ratio_final =
        visual_counts.front() == 0 ? 0.0
                                   : static_cast<double>(visual_counts.back()) / static_cast<double>(visual_counts.front());
    return report;
}

TokenSchedule token_schedule(const mke::MkeConfig& mke_cfg, const hte::HteConfig& hte_cfg,
                             const hte::LlmShape& shape, std::size_t base_tokens, std::optional<double> start_ratio) {
    mke_cfg.validate();
    hte_cfg.validate();
    shape.validate();
    if (hte_cfg.mode != hte::PruneMode::kDropRate) {
        throw ConfigError("token_schedule: threshold pruning has no analytic token count");
    }
    if (base_tokens == 0) throw ConfigError("token_schedule: base token count must be positive");

    TokenSchedule s;
    s.base_tokens = base_tokens;
    if (start_ratio) {
        if (!(*start_ratio > 0.0)) throw ConfigError("token_schedule: start ratio must be positive");
        s.start_count = mke::fraction_to_count(*start_ratio, base_tokens);
    } else {
        s.start_count = mke::mke_token_count(base_tokens, mke_cfg);
    }

    std::vector<bool> prunes(shape.n_layers, false);
    for (std::size_t l : hte::layer_schedule(shape, hte_cfg)) prunes[l] = true;
    std::size_t n = s.start_count;
    for (std::size_t l = 0; l < shape.n_layers; ++l) {
        s.layer_counts.push_back(n);
        if (prunes[l]) n -= hte::drop_count(hte_cfg.drop_rate, n);
    }
    s.final_count = n;
    const double base = static_cast<double>(base_tokens);
    s.start_ratio = static_cast<double>(s.start_count) / base;
    s.final_ratio = static_cast<double>(n) / base;
    return s;
}

}  // namespace tokcompact::metrics
