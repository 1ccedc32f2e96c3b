// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tokcompact/feature_map.hpp"
#include "tokcompact/matrix.hpp"

namespace tokcompact::hte {

struct LlmShape {
    std::size_t n_layers = 28;
    std::size_t hidden_dim = 64;
    std::size_t n_heads = 4;
    std::size_t ffn_dim = 128;
    std::size_t expert_ffn_dim = 64;
    std::size_t n_visual_experts = 4;
    std::size_t router_topk = 2;

    void validate() const;

    // Desk-scale stack used by the pipeline.
    static LlmShape toy();
    // Qwen3-0.6B-like backbone for cost modelling (grouped KV ignored). The two
    // activated experts together are half the FFN width.
    static LlmShape reference();
};

enum class Schedule { kFirstHalf, kSecondHalf, kDense, kSparse };
enum class PruneMode { kDropRate, kThreshold };
enum class ScoreFn { kMax, kSum, kRandom };

std::string to_string(Schedule s);
std::string to_string(PruneMode m);
std::string to_string(ScoreFn f);
Schedule parse_schedule(const std::string& s);
PruneMode parse_prune_mode(const std::string& s);
ScoreFn parse_score_fn(const std::string& s);

struct HteConfig {
    Schedule schedule = Schedule::kSecondHalf;
    std::size_t sparse_step = 4;
    PruneMode mode = PruneMode::kDropRate;
    double drop_rate = 0.1;  // [0, 1)
    double threshold = 0.0;  // tau, [0, 1]
    ScoreFn score_fn = ScoreFn::kMax;
    // Mix expert outputs with routing weights renormalised over the selected experts.
    bool renormalize = true;
    std::uint64_t seed = 0;  // only the random score function draws from it

    void validate() const;
};

struct RouterDecision {
    std::vector<double> logits;
    std::vector<double> weights;        // softmax(logits)
    std::vector<std::size_t> selected;  // top-k by weight, ties to the lower expert index
    double saliency = 0.0;
};

struct FfnWeights {
    Matrix up;    // D x F
    Matrix down;  // F x D
};

struct LayerWeights {
    Matrix wq, wk, wv, wo;  // D x D
    FfnWeights global;
    std::vector<FfnWeights> experts;
    Matrix router;  // D x N
};

// All weights are drawn once from the seed and never change.
struct StackWeights {
    LlmShape shape;
    std::vector<LayerWeights> layers;

    static StackWeights random(const LlmShape& shape, std::uint64_t seed);
};

struct MoeOptions {
    std::size_t topk = 2;
    bool renormalize = true;
    bool pre_norm = true;  // expert and router inputs are RMS-normalised; the residual is not
};

// Routes every row of `x` (n x D) through W_r (D x N). Saliency is the max-mode score.
std::vector<RouterDecision> router_forward(const Matrix& x, const Matrix& w_router, std::size_t topk);

// Saliency of one routed token. `random_draw` in (0, 1] is used by ScoreFn::kRandom only.
double token_saliency(const RouterDecision& decision, ScoreFn fn, double random_draw = 1.0);
// Seeded (0, 1] draw for the random baseline, keyed by layer and token id.
double random_score_draw(std::uint64_t seed, std::size_t layer, std::size_t token_id);

Matrix gelu(const Matrix& x);
Matrix rms_norm(const Matrix& x);
Matrix ffn_forward(const Matrix& x, const FfnWeights& w);

struct MoeOutput {
    Matrix hidden;
    std::vector<RouterDecision> decisions;  // one per visual token, in token order
};

// y = x + E_global(u) + 1_vis(x) * sum_{i in K} w_i(u) E_i(u), with u = x or RMSNorm(x).
MoeOutput moe_layer_forward(const Matrix& hidden, const std::vector<bool>& visual_mask, const LayerWeights& w,
                            const MoeOptions& opts);
// y = x + E_global(u): the same layer without visual experts.
Matrix dense_layer_forward(const Matrix& hidden, const LayerWeights& w, bool pre_norm = true);

// Causal multi-head self-attention with pre-norm and residual.
Matrix attention_forward(const Matrix& hidden, const LayerWeights& w, std::size_t n_heads);

struct DroppedToken {
    std::size_t token_id = 0;
    std::optional<GridPos> position;
    std::vector<double> hidden;  // hidden state at drop time
};

struct PruneRecord {
    std::size_t layer_index = 0;
    std::vector<DroppedToken> dropped;
    std::size_t kept_count = 0;
};

// Visual tokens as they travel through the stack.
struct VisualTokens {
    Matrix hidden;
    std::vector<std::size_t> ids;
    std::vector<GridPos> positions;

    std::size_t size() const noexcept { return ids.size(); }
};

struct PruneResult {
    VisualTokens kept;
    PruneRecord record;
};

// Number of tokens a drop-rate layer removes from n: floor(d * n).
std::size_t drop_count(double drop_rate, std::size_t n);

// drop_rate mode drops the floor(d*n) lowest-saliency tokens (ties: the higher
// token id goes first); threshold mode drops every token with saliency <= tau.
// Survivors keep their relative order.
PruneResult prune_layer(const VisualTokens& tokens, std::span<const double> saliency, const HteConfig& cfg,
                        std::size_t layer_index);

std::vector<std::size_t> layer_schedule(const LlmShape& shape, const HteConfig& cfg);

// Switch-style auxiliary loss N * sum_i f_i * P_i; computed for reporting only.
double load_balance_loss(std::span<const RouterDecision> decisions);

struct LayerObservation {
    std::size_t layer = 0;
    std::size_t visual_in = 0;
    double aux_loss = 0.0;
    const VisualTokens* visual_out = nullptr;
};

struct StackResult {
    VisualTokens visual;  // surviving visual tokens after the last layer
    Matrix text;          // text hidden states after the last layer
    std::vector<PruneRecord> records;
    std::vector<std::size_t> layer_counts;  // visual tokens entering each layer
    std::size_t final_count = 0;
    std::vector<double> aux_losses;
};

using LayerObserver = std::function<void(const LayerObservation&)>;

// Runs every layer over [visual || text]: attention, then the MoE block, then
// pruning on the layers the schedule selects, scored by that layer's routing.
StackResult run_stack(const StackWeights& weights, const FeatureMap& visual, const Matrix& text, const HteConfig& cfg,
                      const LayerObserver& observer = {});

}  // namespace tokcompact::hte
