// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/sip.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tokcompact/error.hpp"
#include "tokcompact/ops.hpp"

namespace tokcompact::sip {

void SipConfig::validate() const {
    if (lambda && !(*lambda > 0.0 && std::isfinite(*lambda))) throw ConfigError("sip: lambda must be positive");
    if (topk == 0) throw ConfigError("sip: topk must be at least 1");
    if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("sip: omega must lie in [0, 1]");
    if (fsq_levels < 2) throw ConfigError("sip: fsq_levels must be at least 2");
}

double SipConfig::lambda_for(std::size_t dim) const {
    return lambda ? *lambda : 1.0 / std::sqrt(static_cast<double>(dim));
}

Matrix init_pruned_embeddings(std::span<const hte::PruneRecord> records, std::size_t height, std::size_t width,
                              std::size_t dim) {
    std::vector<GridPos> positions;
    for (const auto& rec : records) {
        for (const auto& tok : rec.dropped) {
            if (!tok.position) {
                throw DataError("sip: dropped token " + std::to_string(tok.token_id) + " at layer " +
                                std::to_string(rec.layer_index) + " has no grid position");
            }
            if (tok.position->row >= height || tok.position->col >= width) {
                throw DataError("sip: dropped token " + std::to_string(tok.token_id) + " lies outside the " +
                                std::to_string(height) + "x" + std::to_string(width) + " grid");
            }
            positions.push_back(*tok.position);
        }
    }
    if (positions.empty()) return Matrix(0, dim);
    return rope2d_embed(positions, dim);
}

Matrix affinity(const Matrix& vc, const Matrix& vp, double lambda) {
    if (vc.cols() != vp.cols()) {
        throw ShapeError("affinity: Vc dim " + std::to_string(vc.cols()) + " != Vp dim " + std::to_string(vp.cols()));
    }
    Matrix z = matmul_transposed(vc, vp);
    for (double& v : z.data()) v *= lambda;
    return z;
}

Matrix sparsify_topk(const Matrix& z, std::size_t k) {
    if (k == 0) throw ConfigError("sparsify_topk: k must be at least 1");
    if (k > z.cols()) {
        throw ConfigError("sparsify_topk: k=" + std::to_string(k) + " exceeds " + std::to_string(z.cols()) +
                          " columns");
    }
    Matrix out(z.rows(), z.cols());
    std::vector<std::size_t> order(z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto row = z.row(i);
        std::iota(order.begin(), order.end(), 0);
        std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
        for (std::size_t j = 0; j < k; ++j) out(i, order[j]) = row[order[j]];
    }
    return out;
}

namespace {

// a <- omega * a + (1 - omega) * base
void blend(Matrix& a, const Matrix& base, double omega) {
    auto ad = a.data();
    auto bd = base.data();
    for (std::size_t i = 0; i < ad.size(); ++i) ad[i] = omega * ad[i] + (1.0 - omega) * bd[i];
}

}  // namespace

PropagationState propagate(const Matrix& vc0, const Matrix& vp0, const SipConfig& cfg) {
    cfg.validate();
    if (vc0.rows() == 0) throw DegenerateInputError("propagate: no condensed tokens", 0);
    PropagationState state;
    state.vc = vc0;
    state.vp = vp0;
    if (vp0.rows() == 0) {
        state.z_sparse = Matrix(vc0.rows(), 0);
        return state;
    }

    Matrix z = sparsify_topk(affinity(vc0, vp0, cfg.lambda_for(vc0.cols())), std::min(cfg.topk, vp0.rows()));
    for (double& v : z.data()) v = std::max(v, 0.0);
    state.z_sparse = z;

    Matrix rows_norm = z;
    for (std::size_t i = 0; i < rows_norm.rows(); ++i) {
        auto r = rows_norm.row(i);
        const double s = std::accumulate(r.begin(), r.end(), 0.0);
        for (double& v : r) v = s > 0.0 ? v / s : 0.0;
    }
    Matrix cols_norm_t = transpose(z);  // |Vp| x |Vc|
    for (std::size_t j = 0; j < cols_norm_t.rows(); ++j) {
        auto r = cols_norm_t.row(j);
        const double s = std::accumulate(r.begin(), r.end(), 0.0);
        for (double& v : r) v = s > 0.0 ? v / s : 0.0;
    }

    for (std::size_t t = 1; t <= cfg.iterations; ++t) {
        Matrix vc = matmul(rows_norm, state.vp);
        blend(vc, vc0, cfg.omega);
        Matrix vp = matmul(cols_norm_t, vc);
        blend(vp, vp0, cfg.omega);

        double delta = 0.0;
        auto a = vp.data();
        auto b = state.vp.data();
        for (std::size_t i = 0; i < a.size(); ++i) delta = std::max(delta, std::abs(a[i] - b[i]));
        state.deltas.push_back(delta);
        state.vc = std::move(vc);
        state.vp = std::move(vp);
        state.iteration = t;
    }
    return state;
}

Matrix fsq_quantize(const Matrix& v, std::size_t levels) {
    if (levels < 2) throw ConfigError("fsq_quantize: need at least 2 levels");
    const double L = static_cast<double>(levels);
    std::vector<double> centre(levels);
    for (std::size_t c = 0; c < levels; ++c) centre[c] = std::atanh(-1.0 + (2.0 * static_cast<double>(c) + 1.0) / L);

    Matrix out = v;
    for (double& x : out.data()) {
        const double u = 0.5 * L * (std::tanh(x) + 1.0) - 0.5;
        const double code = std::clamp(std::nearbyint(u), 0.0, L - 1.0);  // ties to even
        x = centre[static_cast<std::size_t>(code)];
    }
    return out;
}

double qrec_loss(const Matrix& vp, const Matrix& vorig, std::size_t levels) {
    if (vp.rows() != vorig.rows() || vp.cols() != vorig.cols()) {
        throw DataError("qrec_loss: reconstruction is " + std::to_string(vp.rows()) + "x" + std::to_string(vp.cols()) +
                        " but the original rows are " + std::to_string(vorig.rows()) + "x" +
                        std::to_string(vorig.cols()));
    }
    const Matrix qa = fsq_quantize(vp, levels);
    const Matrix qb = fsq_quantize(vorig, levels);
    double total = 0.0;
    for (std::size_t i = 0; i < qa.rows(); ++i) {
        const auto a = qa.row(i);
        const auto b = qb.row(i);
        double sq = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) sq += (a[c] - b[c]) * (a[c] - b[c]);
        total += std::sqrt(sq);
    }
    return total;
}

SipResult sip_pass(std::span<const hte::PruneRecord> records, const Matrix& kept, const FeatureMap& unified,
                   const SipConfig& cfg) {
    cfg.validate();
    SipResult result;
    for (const auto& rec : records)
        for (const auto& tok : rec.dropped) {
            if (tok.token_id >= unified.token_count()) {
                throw DataError("sip: dropped token id " + std::to_string(tok.token_id) + " has no row in the " +
                                std::to_string(unified.token_count()) + "-token input");
            }
            result.token_ids.push_back(tok.token_id);
        }

    if (result.token_ids.empty()) {
        result.state.vc = kept;
        result.state.vp = Matrix(0, kept.cols());
        result.state.z_sparse = Matrix(kept.rows(), 0);
        result.original = Matrix(0, unified.dim());
        return result;
    }
    if (kept.cols() != unified.dim()) {
        throw ShapeError("sip: kept dim " + std::to_string(kept.cols()) + " != input dim " +
                         std::to_string(unified.dim()));
    }

    const Matrix vp0 = init_pruned_embeddings(records, unified.height, unified.width, unified.dim());
    result.state = propagate(kept, vp0, cfg);
    result.original = select_rows(unified.tokens, result.token_ids);
    result.qrec = qrec_loss(result.state.vp, result.original, cfg.fsq_levels);
    return result;
}

}  // namespace tokcompact::sip
