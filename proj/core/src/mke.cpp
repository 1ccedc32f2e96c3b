// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/mke.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tokcompact/error.hpp"
#include "tokcompact/rng.hpp"
#include "tokcompact/streams.hpp"

namespace tokcompact::mke {

void MkeConfig::validate() const {
    if (r == 0) throw ConfigError("mke: r must be a positive integer");
    if (!(k_self >= 0.0 && k_self < 1.0)) throw ConfigError("mke: k_self must lie in [0, 1)");
    if (!(k_cross >= 0.0 && k_cross <= 1.0)) throw ConfigError("mke: k_cross must lie in [0, 1]");
}

FeatureMap space_to_depth(const FeatureMap& f, std::size_t r) {
    if (r == 0) throw ConfigError("space_to_depth: r must be positive");
    if (!f.is_grid()) throw ShapeError("space_to_depth: input is not grid-shaped");
    if (f.height % r != 0 || f.width % r != 0) {
        throw ShapeError("space_to_depth: r=" + std::to_string(r) + " does not divide grid " +
                         std::to_string(f.height) + "x" + std::to_string(f.width));
    }
    if (r == 1) return f;

    const std::size_t out_h = f.height / r;
    const std::size_t out_w = f.width / r;
    const std::size_t d = f.dim();
    FeatureMap out;
    out.height = out_h;
    out.width = out_w;
    out.tokens = Matrix(out_h * out_w, d * r * r);
    out.positions.reserve(out_h * out_w);
    out.sizes.reserve(out_h * out_w);
    for (std::size_t br = 0; br < out_h; ++br) {
        for (std::size_t bc = 0; bc < out_w; ++bc) {
            auto dst = out.tokens.row(br * out_w + bc);
            double mass = 0.0;
            std::size_t slot = 0;
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < r; ++j, ++slot) {
                    const std::size_t src = (br * r + i) * f.width + (bc * r + j);
                    std::ranges::copy(f.tokens.row(src), dst.begin() + static_cast<std::ptrdiff_t>(slot * d));
                    mass += f.sizes[src];
                }
            }
            out.positions.push_back({br, bc});
            out.sizes.push_back(mass);
        }
    }
    return out;
}

BipartiteSplit bipartite_partition(const FeatureMap& f) {
    const std::size_t n = f.token_count();
    if (n < 2) throw DegenerateInputError("bipartite_partition: need at least 2 tokens, got " + std::to_string(n), n);
    BipartiteSplit split;
    split.dst_ids.reserve((n + 1) / 2);
    split.src_ids.reserve(n / 2);
    for (std::size_t i = 0; i < n; ++i) (i % 2 == 0 ? split.dst_ids : split.src_ids).push_back(i);
    return split;
}

MergeResult bipartite_merge(const FeatureMap& dst, const FeatureMap& src, std::size_t k) {
    const std::size_t nd = dst.token_count();
    const std::size_t ns = src.token_count();
    if (k > ns) {
        throw ConfigError("bipartite_merge: k=" + std::to_string(k) + " exceeds " + std::to_string(ns) +
                          " source tokens");
    }
    if (ns > 0 && nd > 0 && dst.dim() != src.dim()) {
        throw ShapeError("bipartite_merge: dst dim " + std::to_string(dst.dim()) + " != src dim " +
                         std::to_string(src.dim()));
    }
    if (k > 0 && nd == 0) throw DegenerateInputError("bipartite_merge: no destination tokens", 0);

    MergeResult result;
    result.trace.input_count = nd + ns;
    result.trace.rounds = 1;

    std::vector<bool> merged(ns, false);
    std::vector<std::size_t> target(ns, 0);
    if (k > 0) {
        const Matrix sim = cosine_sim_matrix(src.tokens, dst.tokens);
        std::vector<double> best(ns);
        for (std::size_t j = 0; j < ns; ++j) {
            const auto row = sim.row(j);
            const auto it = std::ranges::max_element(row);  // first maximum: lowest dst index
            target[j] = static_cast<std::size_t>(it - row.begin());
            best[j] = *it;
        }
        std::vector<std::size_t> order(ns);
        std::iota(order.begin(), order.end(), 0);
        std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return best[a] > best[b]; });
        for (std::size_t e = 0; e < k; ++e) {
            const std::size_t j = order[e];
            merged[j] = true;
            result.trace.edges.push_back({nd + j, target[j], best[j]});
        }
    }

    // Fold merged sources into their targets, visiting sources in index order.
    std::vector<std::vector<std::size_t>> incoming(nd);
    for (std::size_t j = 0; j < ns; ++j)
        if (merged[j]) incoming[target[j]].push_back(j);

    const std::size_t out_count = nd + ns - k;
    const std::size_t d = nd > 0 ? dst.dim() : src.dim();
    FeatureMap& out = result.merged;
    out.height = dst.height;
    out.width = dst.width;
    out.tokens = Matrix(out_count, d);
    out.positions.reserve(out_count);
    out.sizes.reserve(out_count);
    result.trace.survivors.reserve(out_count);

    for (std::size_t i = 0; i < nd; ++i) {
        auto row = out.tokens.row(i);
        std::vector<std::size_t> contributors{i};
        if (incoming[i].empty()) {
            std::ranges::copy(dst.tokens.row(i), row.begin());
            out.sizes.push_back(dst.sizes[i]);
        } else {
            double mass = dst.sizes[i];
            const auto x = dst.tokens.row(i);
            for (std::size_t c = 0; c < d; ++c) row[c] = dst.sizes[i] * x[c];
            for (std::size_t j : incoming[i]) {
                const auto y = src.tokens.row(j);
                for (std::size_t c = 0; c < d; ++c) row[c] += src.sizes[j] * y[c];
                mass += src.sizes[j];
                contributors.push_back(nd + j);
            }
            for (double& v : row) v /= mass;
            out.sizes.push_back(mass);
        }
        out.positions.push_back(dst.positions[i]);
        result.trace.survivors.push_back(std::move(contributors));
    }
    std::size_t o = nd;
    for (std::size_t j = 0; j < ns; ++j) {
        if (merged[j]) continue;
        std::ranges::copy(src.tokens.row(j), out.tokens.row(o++).begin());
        out.positions.push_back(src.positions[j]);
        out.sizes.push_back(src.sizes[j]);
        result.trace.survivors.push_back({nd + j});
    }
    return result;
}

std::size_t fraction_to_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

MergeResult self_merge(const FeatureMap& extra, double k_self) {
    if (!(k_self >= 0.0 && k_self < 1.0)) throw ConfigError("self_merge: k_self must lie in [0, 1)");
    const std::size_t n = extra.token_count();
    if (n < 2) throw DegenerateInputError("self_merge: need at least 2 tokens, got " + std::to_string(n), n);

    MergeResult result;
    result.merged = extra;
    result.trace.input_count = n;
    // Original ids folded into each current token; element 0 is its representative.
    std::vector<std::vector<std::size_t>> groups(n);
    for (std::size_t i = 0; i < n; ++i) groups[i] = {i};

    std::size_t remaining = fraction_to_count(k_self, n);
    while (remaining > 0) {
        const FeatureMap& cur = result.merged;
        const BipartiteSplit split = bipartite_partition(cur);
        const std::size_t k = std::min(remaining, split.src_ids.size());
        MergeResult round = bipartite_merge(take_tokens(cur, split.dst_ids), take_tokens(cur, split.src_ids), k);

        const std::size_t nd = split.dst_ids.size();
        auto to_current = [&](std::size_t local) {
            return local < nd ? split.dst_ids[local] : split.src_ids[local - nd];
        };
        for (const MergeEdge& e : round.trace.edges) {
            result.trace.edges.push_back(
                {groups[to_current(e.src_id)][0], groups[to_current(e.dst_id)][0], e.similarity});
        }
        std::vector<std::vector<std::size_t>> next;
        next.reserve(round.trace.survivors.size());
        for (const auto& locals : round.trace.survivors) {
            std::vector<std::size_t> g = groups[to_current(locals[0])];
            for (std::size_t l = 1; l < locals.size(); ++l) {
                const auto& folded = groups[to_current(locals[l])];
                g.insert(g.end(), folded.begin(), folded.end());
            }
            std::sort(g.begin() + 1, g.end());
            next.push_back(std::move(g));
        }
        groups = std::move(next);
        result.merged = std::move(round.merged);
        remaining -= k;
        ++result.trace.rounds;
    }
    std::ranges::stable_sort(result.trace.edges, [](const MergeEdge& a, const MergeEdge& b) {
        return a.similarity > b.similarity;
    });
    result.trace.survivors = std::move(groups);
    return result;
}

MergeResult cross_merge(const FeatureMap& main, const FeatureMap& extra, double k_cross) {
    if (!(k_cross >= 0.0 && k_cross <= 1.0)) throw ConfigError("cross_merge: k_cross must lie in [0, 1]");
    return bipartite_merge(main, extra, fraction_to_count(k_cross, extra.token_count()));
}

Matrix branch_projection(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed, std::uint64_t stream) {
    Rng rng(seed, stream);
    return random_normal(in_dim, out_dim, rng, 1.0 / std::sqrt(static_cast<double>(in_dim)));
}

namespace {

FeatureMap project(const FeatureMap& f, const Matrix& w) {
    FeatureMap out = f;
    out.tokens = matmul(f.tokens, w);
    return out;
}

}  // namespace

MkeResult mke_forward(const FeatureMap& main, const FeatureMap& extra, const MkeConfig& cfg, std::size_t hidden_dim,
                      std::uint64_t seed) {
    cfg.validate();
    main.validate();
    extra.validate();
    if (main.height != extra.height || main.width != extra.width || !main.is_grid() || !extra.is_grid()) {
        throw ShapeError("mke_forward: branches must share the same token grid");
    }
    if (hidden_dim == 0) throw ConfigError("mke_forward: hidden_dim must be positive");

    MkeResult result;
    if (cfg.bypass) {
        const FeatureMap pm = project(main, branch_projection(main.dim(), hidden_dim, seed, streams::kMainProjection));
        const FeatureMap pe =
            project(extra, branch_projection(extra.dim(), hidden_dim, seed, streams::kExtraProjection));
        result.main_tokens = pm.token_count();
        result.extra_tokens = pe.token_count();
        result.extra_after_self = pe.token_count();
        result.unified = concat_tokens(pm, pe);
        return result;
    }

    const FeatureMap main_hat = space_to_depth(main, cfg.r);
    const FeatureMap extra_hat = space_to_depth(extra, cfg.r);
    const FeatureMap pm =
        project(main_hat, branch_projection(main_hat.dim(), hidden_dim, seed, streams::kMainProjection));
    const FeatureMap pe =
        project(extra_hat, branch_projection(extra_hat.dim(), hidden_dim, seed, streams::kExtraProjection));
    result.main_tokens = pm.token_count();
    result.extra_tokens = pe.token_count();

    MergeResult self = self_merge(pe, cfg.k_self);
    result.extra_after_self = self.merged.token_count();
    MergeResult cross = cross_merge(pm, self.merged, cfg.k_cross);
    result.unified = std::move(cross.merged);
    result.traces.push_back(std::move(self.trace));
    result.traces.push_back(std::move(cross.trace));
    return result;
}

std::size_t mke_token_count(std::size_t base_tokens, const MkeConfig& cfg) {
    cfg.validate();
    if (cfg.bypass) return 2 * base_tokens;
    const std::size_t block = cfg.r * cfg.r;
    if (base_tokens % block != 0) {
        throw ShapeError("mke_token_count: " + std::to_string(base_tokens) + " tokens not divisible by r^2");
    }
    const std::size_t n = base_tokens / block;
    const std::size_t extra = n - fraction_to_count(cfg.k_self, n);
    return n + extra - fraction_to_count(cfg.k_cross, extra);
}

}  // namespace tokcompact::mke
