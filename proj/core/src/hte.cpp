// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/hte.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_set>

#include "tokcompact/error.hpp"
#include "tokcompact/ops.hpp"
#include "tokcompact/rng.hpp"
#include "tokcompact/streams.hpp"

namespace tokcompact::hte {

void LlmShape::validate() const {
    if (n_layers == 0) throw ConfigError("llm: n_layers must be positive");
    if (hidden_dim == 0 || n_heads == 0 || hidden_dim % n_heads != 0) {
        throw ConfigError("llm: hidden_dim must be a positive multiple of n_heads");
    }
    if (ffn_dim == 0 || expert_ffn_dim == 0 || expert_ffn_dim > ffn_dim) {
        throw ConfigError("llm: need 0 < expert_ffn_dim <= ffn_dim");
    }
    if (n_visual_experts == 0 || router_topk == 0 || router_topk > n_visual_experts) {
        throw ConfigError("llm: need 1 <= router_topk <= n_visual_experts");
    }
}

LlmShape LlmShape::toy() { return LlmShape{}; }

LlmShape LlmShape::reference() {
    return LlmShape{.n_layers = 28,
                    .hidden_dim = 1024,
                    .n_heads = 16,
                    .ffn_dim = 3072,
                    .expert_ffn_dim = 768,
                    .n_visual_experts = 4,
                    .router_topk = 2};
}

std::string to_string(Schedule s) {
    switch (s) {
        case Schedule::kFirstHalf: return "first_half";
        case Schedule::kSecondHalf: return "second_half";
        case Schedule::kDense: return "dense";
        case Schedule::kSparse: return "sparse";
    }
    return "?";
}

std::string to_string(PruneMode m) { return m == PruneMode::kDropRate ? "drop_rate" : "threshold"; }

std::string to_string(ScoreFn f) {
    switch (f) {
        case ScoreFn::kMax: return "max";
        case ScoreFn::kSum: return "sum";
        case ScoreFn::kRandom: return "random";
    }
    return "?";
}

Schedule parse_schedule(const std::string& s) {
    if (s == "first_half") return Schedule::kFirstHalf;
    if (s == "second_half") return Schedule::kSecondHalf;
    if (s == "dense") return Schedule::kDense;
    if (s == "sparse") return Schedule::kSparse;
    throw ConfigError("unknown HTE schedule '" + s + "'");
}

PruneMode parse_prune_mode(const std::string& s) {
    if (s == "drop_rate") return PruneMode::kDropRate;
    if (s == "threshold") return PruneMode::kThreshold;
    throw ConfigError("unknown HTE mode '" + s + "'");
}

ScoreFn parse_score_fn(const std::string& s) {
    if (s == "max") return ScoreFn::kMax;
    if (s == "sum") return ScoreFn::kSum;
    if (s == "random") return ScoreFn::kRandom;
    throw ConfigError("unknown score function '" + s + "'");
}

void HteConfig::validate() const {
    if (mode == PruneMode::kDropRate && !(drop_rate >= 0.0 && drop_rate < 1.0)) {
        throw ConfigError("hte: drop_rate must lie in [0, 1)");
    }
    if (mode == PruneMode::kThreshold && !(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError("hte: threshold must lie in [0, 1]");
    }
    if (schedule == Schedule::kSparse && sparse_step == 0) throw ConfigError("hte: sparse_step must be positive");
}

StackWeights StackWeights::random(const LlmShape& shape, std::uint64_t seed) {
    shape.validate();
    const std::size_t d = shape.hidden_dim;
    const double in_d = 1.0 / std::sqrt(static_cast<double>(d));
    // Output projections are damped so the residual stream stays O(1) over depth.
    const double depth = 1.0 / std::sqrt(2.0 * static_cast<double>(shape.n_layers));
    auto ffn = [&](Rng& rng, std::size_t width) {
        FfnWeights w;
        w.up = random_normal(d, width, rng, in_d);
        w.down = random_normal(width, d, rng, depth / std::sqrt(static_cast<double>(width)));
        return w;
    };

    StackWeights weights;
    weights.shape = shape;
    weights.layers.reserve(shape.n_layers);
    for (std::size_t l = 0; l < shape.n_layers; ++l) {
        Rng rng(seed, streams::kLayerWeightsBase + l);
        LayerWeights lw;
        lw.wq = random_normal(d, d, rng, in_d);
        lw.wk = random_normal(d, d, rng, in_d);
        lw.wv = random_normal(d, d, rng, in_d);
        lw.wo = random_normal(d, d, rng, in_d * depth);
        lw.global = ffn(rng, shape.ffn_dim);
        for (std::size_t e = 0; e < shape.n_visual_experts; ++e) lw.experts.push_back(ffn(rng, shape.expert_ffn_dim));
        lw.router = random_normal(d, shape.n_visual_experts, rng, in_d);
        weights.layers.push_back(std::move(lw));
    }
    return weights;
}

std::vector<RouterDecision> router_forward(const Matrix& x, const Matrix& w_router, std::size_t topk) {
    if (x.cols() != w_router.rows()) {
        throw ShapeError("router_forward: token dim " + std::to_string(x.cols()) + " != router rows " +
                         std::to_string(w_router.rows()));
    }
    const std::size_t n_experts = w_router.cols();
    if (topk == 0 || topk > n_experts) throw ConfigError("router_forward: topk must lie in [1, N]");

    const Matrix logits = matmul(x, w_router);
    std::vector<RouterDecision> out(x.rows());
    std::vector<std::size_t> order(n_experts);
    for (std::size_t t = 0; t < x.rows(); ++t) {
        RouterDecision& dec = out[t];
        dec.logits.assign(logits.row(t).begin(), logits.row(t).end());
        dec.weights = dec.logits;
        softmax_inplace(dec.weights);
        std::iota(order.begin(), order.end(), 0);
        std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return dec.weights[a] > dec.weights[b]; });
        dec.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(topk));
        dec.saliency = token_saliency(dec, ScoreFn::kMax);
    }
    return out;
}

double token_saliency(const RouterDecision& decision, ScoreFn fn, double random_draw) {
    switch (fn) {
        case ScoreFn::kMax: {
            double best = 0.0;
            for (std::size_t e : decision.selected) best = std::max(best, decision.weights[e]);
            return best;
        }
        case ScoreFn::kSum: {
            double total = 0.0;
            for (std::size_t e : decision.selected) total += decision.weights[e];
            return total;
        }
        case ScoreFn::kRandom: return random_draw;
    }
    return 0.0;
}

double random_score_draw(std::uint64_t seed, std::size_t layer, std::size_t token_id) {
    const std::uint64_t counter = (static_cast<std::uint64_t>(layer) << 32) ^ static_cast<std::uint64_t>(token_id);
    return 1.0 - uniform_at(seed, streams::kRandomScore, counter);
}

Matrix gelu(const Matrix& x) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2 / pi)
    Matrix out = x;
    for (double& v : out.data()) v = 0.5 * v * (1.0 + std::tanh(kC * (v + 0.044715 * v * v * v)));
    return out;
}

Matrix rms_norm(const Matrix& x) {
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        const double ms = dot(row, row) / static_cast<double>(row.size());
        const double inv = 1.0 / std::sqrt(ms + 1e-6);
        for (double& v : row) v *= inv;
    }
    return out;
}

Matrix ffn_forward(const Matrix& x, const FfnWeights& w) { return matmul(gelu(matmul(x, w.up)), w.down); }

namespace {

Matrix residual_global(const Matrix& hidden, const Matrix& u, const LayerWeights& w) {
    const Matrix g = ffn_forward(u, w.global);
    Matrix out = hidden;
    auto o = out.data();
    auto gd = g.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += gd[i];
    return out;
}

}  // namespace

Matrix dense_layer_forward(const Matrix& hidden, const LayerWeights& w, bool pre_norm) {
    const Matrix u = pre_norm ? rms_norm(hidden) : hidden;
    return residual_global(hidden, u, w);
}

MoeOutput moe_layer_forward(const Matrix& hidden, const std::vector<bool>& visual_mask, const LayerWeights& w,
                            const MoeOptions& opts) {
    if (visual_mask.size() != hidden.rows()) {
        throw ShapeError("moe_layer_forward: mask length " + std::to_string(visual_mask.size()) + " != " +
                         std::to_string(hidden.rows()) + " tokens");
    }
    const Matrix u = opts.pre_norm ? rms_norm(hidden) : hidden;
    MoeOutput out;
    out.hidden = residual_global(hidden, u, w);

    std::vector<std::size_t> visual_rows;
    for (std::size_t i = 0; i < visual_mask.size(); ++i)
        if (visual_mask[i]) visual_rows.push_back(i);
    if (visual_rows.empty()) return out;

    const Matrix u_vis = select_rows(u, visual_rows);
    out.decisions = router_forward(u_vis, w.router, opts.topk);

    // Batch each expert over the tokens routed to it.
    const std::size_t n_experts = w.experts.size();
    std::vector<std::vector<std::size_t>> routed(n_experts);
    for (std::size_t t = 0; t < visual_rows.size(); ++t)
        for (std::size_t e : out.decisions[t].selected) routed[e].push_back(t);
    std::vector<Matrix> expert_out(n_experts);
    std::vector<std::vector<std::size_t>> slot_of(n_experts, std::vector<std::size_t>(visual_rows.size(), 0));
    for (std::size_t e = 0; e < n_experts; ++e) {
        if (routed[e].empty()) continue;
        expert_out[e] = ffn_forward(select_rows(u_vis, routed[e]), w.experts[e]);
        for (std::size_t s = 0; s < routed[e].size(); ++s) slot_of[e][routed[e][s]] = s;
    }

    std::vector<double> mix(hidden.cols());
    for (std::size_t t = 0; t < visual_rows.size(); ++t) {
        const RouterDecision& dec = out.decisions[t];
        double norm = 1.0;
        if (opts.renormalize) {
            norm = 0.0;
            for (std::size_t e : dec.selected) norm += dec.weights[e];
        }
        std::ranges::fill(mix, 0.0);
        for (std::size_t e : dec.selected) {
            const double coeff = dec.weights[e] / norm;
            const auto y = expert_out[e].row(slot_of[e][t]);
            for (std::size_t c = 0; c < mix.size(); ++c) mix[c] += coeff * y[c];
        }
        auto row = out.hidden.row(visual_rows[t]);
        for (std::size_t c = 0; c < mix.size(); ++c) row[c] += mix[c];
    }
    return out;
}

Matrix attention_forward(const Matrix& hidden, const LayerWeights& w, std::size_t n_heads) {
    const std::size_t n = hidden.rows();
    const std::size_t d = hidden.cols();
    if (n_heads == 0 || d % n_heads != 0) throw ShapeError("attention_forward: dim not divisible by heads");
    const std::size_t hd = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    const Matrix u = rms_norm(hidden);
    const Matrix q = matmul(u, w.wq);
    const Matrix k = matmul(u, w.wk);
    const Matrix v = matmul(u, w.wv);

    Matrix ctx(n, d);
    std::vector<double> scores(n);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t off = h * hd;
        for (std::size_t i = 0; i < n; ++i) {
            const auto qi = q.row(i).subspan(off, hd);
            for (std::size_t j = 0; j <= i; ++j) scores[j] = scale * dot(qi, k.row(j).subspan(off, hd));
            std::span<double> causal(scores.data(), i + 1);
            softmax_inplace(causal);
            auto ci = ctx.row(i).subspan(off, hd);
            for (std::size_t j = 0; j <= i; ++j) {
                const auto vj = v.row(j).subspan(off, hd);
                for (std::size_t c = 0; c < hd; ++c) ci[c] += causal[j] * vj[c];
            }
        }
    }
    const Matrix proj = matmul(ctx, w.wo);
    Matrix out = hidden;
    auto o = out.data();
    auto p = proj.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += p[i];
    return out;
}

std::size_t drop_count(double drop_rate, std::size_t n) {
    return static_cast<std::size_t>(std::floor(drop_rate * static_cast<double>(n) + 1e-9));
}

PruneResult prune_layer(const VisualTokens& tokens, std::span<const double> saliency, const HteConfig& cfg,
                        std::size_t layer_index) {
    cfg.validate();
    const std::size_t n = tokens.size();
    if (saliency.size() != n || tokens.hidden.rows() != n || tokens.positions.size() != n) {
        throw ShapeError("prune_layer: token, position and saliency counts disagree");
    }

    std::vector<bool> drop(n, false);
    if (cfg.mode == PruneMode::kDropRate) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::ranges::sort(order, [&](std::size_t a, std::size_t b) {
            if (saliency[a] != saliency[b]) return saliency[a] < saliency[b];
            return tokens.ids[a] > tokens.ids[b];
        });
        const std::size_t k = drop_count(cfg.drop_rate, n);
        for (std::size_t i = 0; i < k; ++i) drop[order[i]] = true;
    } else {
        for (std::size_t i = 0; i < n; ++i) drop[i] = saliency[i] <= cfg.threshold;
    }

    PruneResult result;
    result.record.layer_index = layer_index;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i) {
        if (drop[i]) {
            const auto h = tokens.hidden.row(i);
            result.record.dropped.push_back({tokens.ids[i], tokens.positions[i], std::vector<double>(h.begin(), h.end())});
        } else {
            keep.push_back(i);
            result.kept.ids.push_back(tokens.ids[i]);
            result.kept.positions.push_back(tokens.positions[i]);
        }
    }
    result.kept.hidden = select_rows(tokens.hidden, keep);
    if (keep.empty()) result.kept.hidden = Matrix(0, tokens.hidden.cols());
    result.record.kept_count = keep.size();
    return result;
}

std::vector<std::size_t> layer_schedule(const LlmShape& shape, const HteConfig& cfg) {
    const std::size_t L = shape.n_layers;
    std::vector<std::size_t> layers;
    switch (cfg.schedule) {
        case Schedule::kSecondHalf:
            for (std::size_t l = (L + 1) / 2; l < L; ++l) layers.push_back(l);
            break;
        case Schedule::kFirstHalf:
            for (std::size_t l = 0; l < L / 2; ++l) layers.push_back(l);
            break;
        case Schedule::kDense:
            for (std::size_t l = 0; l < L; ++l) layers.push_back(l);
            break;
        case Schedule::kSparse:
            if (cfg.sparse_step == 0) throw ConfigError("hte: sparse_step must be positive");
            for (std::size_t l = 0; l < L; l += cfg.sparse_step) layers.push_back(l);
            break;
    }
    return layers;
}

double load_balance_loss(std::span<const RouterDecision> decisions) {
    if (decisions.empty()) throw DegenerateInputError("load_balance_loss: no routed tokens", 0);
    const std::size_t n_experts = decisions.front().weights.size();
    std::vector<double> top1(n_experts, 0.0);
    std::vector<double> mass(n_experts, 0.0);
    for (const RouterDecision& d : decisions) {
        top1[d.selected.front()] += 1.0;
        for (std::size_t e = 0; e < n_experts; ++e) mass[e] += d.weights[e];
    }
    const double t = static_cast<double>(decisions.size());
    double loss = 0.0;
    for (std::size_t e = 0; e < n_experts; ++e) loss += (top1[e] / t) * (mass[e] / t);
    return static_cast<double>(n_experts) * loss;
}

StackResult run_stack(const StackWeights& weights, const FeatureMap& visual, const Matrix& text, const HteConfig& cfg,
                      const LayerObserver& observer) {
    const LlmShape& shape = weights.shape;
    shape.validate();
    cfg.validate();
    if (visual.token_count() == 0) throw DegenerateInputError("run_stack: no visual tokens", 0);
    if (visual.dim() != shape.hidden_dim) {
        throw ShapeError("run_stack: visual dim " + std::to_string(visual.dim()) + " != hidden " +
                         std::to_string(shape.hidden_dim));
    }
    if (text.rows() > 0 && text.cols() != shape.hidden_dim) throw ShapeError("run_stack: text dim mismatch");

    const auto schedule = layer_schedule(shape, cfg);
    const std::unordered_set<std::size_t> pruning(schedule.begin(), schedule.end());
    const MoeOptions opts{.topk = shape.router_topk, .renormalize = cfg.renormalize, .pre_norm = true};

    StackResult result;
    VisualTokens cur;
    cur.hidden = visual.tokens;
    cur.ids.resize(visual.token_count());
    std::iota(cur.ids.begin(), cur.ids.end(), 0);
    cur.positions = visual.positions;
    Matrix txt = text.rows() > 0 ? text : Matrix(0, shape.hidden_dim);

    for (std::size_t l = 0; l < shape.n_layers; ++l) {
        const std::size_t nv = cur.size();
        result.layer_counts.push_back(nv);

        const Matrix x = vstack(cur.hidden, txt);
        std::vector<bool> mask(x.rows(), false);
        std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(nv), true);
        const Matrix h = attention_forward(x, weights.layers[l], shape.n_heads);
        MoeOutput moe = moe_layer_forward(h, mask, weights.layers[l], opts);

        std::vector<std::size_t> vis_rows(nv), txt_rows(x.rows() - nv);
        std::iota(vis_rows.begin(), vis_rows.end(), 0);
        std::iota(txt_rows.begin(), txt_rows.end(), nv);
        cur.hidden = nv > 0 ? select_rows(moe.hidden, vis_rows) : Matrix(0, shape.hidden_dim);
        txt = select_rows(moe.hidden, txt_rows);
        if (txt_rows.empty()) txt = Matrix(0, shape.hidden_dim);

        const double aux = nv > 0 ? load_balance_loss(moe.decisions) : 0.0;
        result.aux_losses.push_back(aux);

        if (nv > 0 && pruning.contains(l)) {
            std::vector<double> saliency(nv);
            for (std::size_t t = 0; t < nv; ++t) {
                const double draw = cfg.score_fn == ScoreFn::kRandom ? random_score_draw(cfg.seed, l, cur.ids[t]) : 1.0;
                saliency[t] = token_saliency(moe.decisions[t], cfg.score_fn, draw);
            }
            PruneResult pruned = prune_layer(cur, saliency, cfg, l);
            cur = std::move(pruned.kept);
            result.records.push_back(std::move(pruned.record));
        }
        if (observer) observer(LayerObservation{l, nv, aux, &cur});
    }
    result.final_count = cur.size();
    result.visual = std::move(cur);
    result.text = std::move(txt);
    return result;
}

}  // namespace tokcompact::hte
