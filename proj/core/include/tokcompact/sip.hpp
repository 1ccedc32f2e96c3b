// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tokcompact/feature_map.hpp"
#include "tokcompact/hte.hpp"
#include "tokcompact/matrix.hpp"

namespace tokcompact::sip {

struct SipConfig {
    std::optional<double> lambda;  // affinity scale; unset means 1/sqrt(D)
    std::size_t topk = 8;          // affinities kept per condensed-token row
    double omega = 0.8;            // propagation level, [0, 1]
    std::size_t iterations = 3;    // T
    std::size_t fsq_levels = 8;    // L

    void validate() const;
    double lambda_for(std::size_t dim) const;
};

struct PropagationState {
    Matrix vc;        // |Vc| x D
    Matrix vp;        // |Vp| x D
    Matrix z_sparse;  // |Vc| x |Vp|, non-negative, <= topk nonzeros per row
    std::size_t iteration = 0;
    std::vector<double> deltas;  // max-abs change of Vp at each iteration
};

// RoPE rows at the dropped tokens' positions, in record order. Positions must
// exist and lie inside the height x width grid.
Matrix init_pruned_embeddings(std::span<const hte::PruneRecord> records, std::size_t height, std::size_t width,
                              std::size_t dim);

// Z = lambda * Vc * Vp^T.
Matrix affinity(const Matrix& vc, const Matrix& vp, double lambda);

// Keeps the k largest entries of each row (ties: lower column), zeroes the rest.
Matrix sparsify_topk(const Matrix& z, std::size_t k);

// Sparsified, clamped affinity is built once from the iteration-0 matrices.
// Each iteration then applies
//   Vc <- omega * Rows(Z) * Vp + (1 - omega) * Vc0
//   Vp <- omega * Cols(Z)^T * Vc + (1 - omega) * Vp0
// where Rows/Cols L1-normalise the rows/columns of Z (all-zero ones stay zero),
// so every update is a convex combination. topk is capped at |Vp|.
PropagationState propagate(const Matrix& vc0, const Matrix& vp0, const SipConfig& cfg);

// Bounded per-channel scalar quantiser on an L-level lattice. Each entry maps to
// the centre of its tanh bin, expressed back in the input domain, so the map is
// idempotent and any input within 1/L of a centre maps onto that centre.
Matrix fsq_quantize(const Matrix& v, std::size_t levels);

// Sum over rows of || Q(vp_i) - Q(vorig_i) ||_2.
double qrec_loss(const Matrix& vp, const Matrix& vorig, std::size_t levels);

struct SipResult {
    std::vector<std::size_t> token_ids;  // dropped token ids, in record order
    PropagationState state;
    Matrix original;  // rows of the unified features at those ids
    double qrec = 0.0;

    std::size_t pruned_count() const noexcept { return token_ids.size(); }
};

// Reconstructs every dropped token from the condensed set `kept` and scores the
// reconstruction against `unified`, the visual features that entered the stack.
// With no dropped tokens the state carries `kept` through untouched.
SipResult sip_pass(std::span<const hte::PruneRecord> records, const Matrix& kept, const FeatureMap& unified,
                   const SipConfig& cfg);

}  // namespace tokcompact::sip
