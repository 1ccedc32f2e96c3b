// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tokcompact/feature_map.hpp"

namespace tokcompact::mke {

struct MkeConfig {
    std::size_t r = 2;      // space-to-depth ratio
    double k_self = 0.5;    // fraction of extra tokens removed by self-merge, [0, 1)
    double k_cross = 0.4;   // fraction of remaining extra tokens fused into main, [0, 1]
    bool bypass = false;    // no space-to-depth and no merging: plain concatenation

    void validate() const;
};

struct MergeEdge {
    std::size_t src_id = 0;
    std::size_t dst_id = 0;
    double similarity = 0.0;
};

// Attribution of every output token to its input tokens.
//
// Input ids are local to the merge call: for bipartite_merge, dst token i has
// id i and src token j has id |dst| + j. self_merge reports ids of its own
// input. survivors[o] lists the inputs folded into output token o, its own
// representative first.
struct MergeTrace {
    std::vector<MergeEdge> edges;  // descending similarity, ties by lower src id
    std::vector<std::vector<std::size_t>> survivors;
    std::string alpha_mode = "size_weighted_mean";
    std::size_t input_count = 0;
    std::size_t rounds = 0;
};

struct MergeResult {
    FeatureMap merged;
    MergeTrace trace;
};

struct BipartiteSplit {
    std::vector<std::size_t> dst_ids;  // even token indices
    std::vector<std::size_t> src_ids;  // odd token indices
};

// Ψ: moves each r x r block into the channel axis (row-major block order).
FeatureMap space_to_depth(const FeatureMap& f, std::size_t r);

BipartiteSplit bipartite_partition(const FeatureMap& f);

// Φ(dst, src, k). Each src token is linked to its most cosine-similar dst token
// (ties: lower dst index); the k best-linked src tokens are folded into their
// targets by size-weighted mean. Unmerged src tokens follow the dst tokens in
// their original order.
MergeResult bipartite_merge(const FeatureMap& dst, const FeatureMap& src, std::size_t k);

// floor(fraction * n), guarded against representation error just below an integer.
std::size_t fraction_to_count(double fraction, std::size_t n);

// Removes floor(k_self * n) tokens from `extra` by bipartite merging. When that
// exceeds one round's capacity (|src| of the split), the split and merge are
// repeated on the result until the budget is spent.
MergeResult self_merge(const FeatureMap& extra, double k_self);

// Fuses floor(k_cross * |extra|) extra tokens into `main`; main tokens keep their order and positions.
MergeResult cross_merge(const FeatureMap& main, const FeatureMap& extra, double k_cross);

struct MkeResult {
    FeatureMap unified;
    std::vector<MergeTrace> traces;  // self-merge, then cross-merge (empty in bypass mode)
    std::size_t main_tokens = 0;     // after space-to-depth
    std::size_t extra_tokens = 0;    // after space-to-depth
    std::size_t extra_after_self = 0;
};

// Seeded Gaussian projection (in_dim -> out_dim) used to bring a branch to the LLM width.
Matrix branch_projection(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed, std::uint64_t stream);

// Ψ on both branches, projection to `hidden_dim`, self-merge of extra, cross-merge into main.
MkeResult mke_forward(const FeatureMap& main, const FeatureMap& extra, const MkeConfig& cfg, std::size_t hidden_dim,
                      std::uint64_t seed);

// Token count mke_forward produces for two branches of `base_tokens` each.
std::size_t mke_token_count(std::size_t base_tokens, const MkeConfig& cfg);

}  // namespace tokcompact::mke
