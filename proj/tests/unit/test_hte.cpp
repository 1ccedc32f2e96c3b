// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "tokcompact/error.hpp"
#include "tokcompact/hte.hpp"
#include "tokcompact/ops.hpp"
#include "tokcompact/rng.hpp"

namespace tokcompact::hte {
namespace {

LlmShape small_shape() {
    return LlmShape{.n_layers = 6, .hidden_dim = 16, .n_heads = 2, .ffn_dim = 32, .expert_ffn_dim = 16,
                    .n_visual_experts = 4, .router_topk = 2};
}

VisualTokens random_tokens(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    VisualTokens t;
    t.hidden = random_normal(n, d, rng);
    t.ids.resize(n);
    std::iota(t.ids.begin(), t.ids.end(), 0);
    for (std::size_t i = 0; i < n; ++i) t.positions.push_back({i / 10, i % 10});
    return t;
}

TEST(Router, UniformLogitsTieToLowerExperts) {
    const auto d = router_forward(Matrix(1, 8), Matrix(8, 4, 0.5), 2);
    ASSERT_EQ(d.size(), 1u);
    for (double w : d[0].weights) EXPECT_EQ(w, 0.25);
    EXPECT_EQ(d[0].selected, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(d[0].saliency, 0.25);
}

TEST(Router, DominantLogit) {
    Matrix w(1, 4, 0.0);
    w(0, 2) = 20.0;
    const auto d = router_forward(Matrix(1, 1, 1.0), w, 2);
    EXPECT_EQ(d[0].selected.front(), 2u);
    EXPECT_NEAR(d[0].weights[2], 1.0, 1e-8);
    EXPECT_NEAR(d[0].saliency, 1.0, 1e-8);
}

TEST(Router, SelectionMatchesFullSort) {
    Rng rng(4);
    const Matrix x = random_normal(10, 6, rng);
    const Matrix w = random_normal(6, 4, rng);
    const auto decisions = router_forward(x, w, 2);
    for (std::size_t t = 0; t < 10; ++t) {
        double sum = 0.0;
        for (double v : decisions[t].weights) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-12);
        std::vector<std::pair<double, std::size_t>> sorted;
        for (std::size_t e = 0; e < 4; ++e) sorted.push_back({-decisions[t].weights[e], e});
        std::sort(sorted.begin(), sorted.end());
        EXPECT_EQ(decisions[t].selected, (std::vector<std::size_t>{sorted[0].second, sorted[1].second}));
        EXPECT_GT(decisions[t].saliency, 0.0);
        EXPECT_LE(decisions[t].saliency, 1.0);
    }
}

TEST(Router, ShapeMismatch) { EXPECT_THROW(router_forward(Matrix(2, 3), Matrix(4, 4), 2), ShapeError); }

TEST(Saliency, MaxSumRandom) {
    RouterDecision d;
    d.weights = {0.7, 0.2, 0.1};
    d.selected = {0, 1};
    EXPECT_DOUBLE_EQ(token_saliency(d, ScoreFn::kMax), 0.7);
    EXPECT_DOUBLE_EQ(token_saliency(d, ScoreFn::kSum), 0.9);
    EXPECT_EQ(token_saliency(d, ScoreFn::kRandom, 0.42), 0.42);
    for (std::size_t id = 0; id < 1000; ++id) {
        const double r = random_score_draw(5, 3, id);
        EXPECT_GT(r, 0.0);
        EXPECT_LE(r, 1.0);
    }
    EXPECT_EQ(random_score_draw(5, 3, 9), random_score_draw(5, 3, 9));
    EXPECT_NE(random_score_draw(5, 3, 9), random_score_draw(5, 4, 9));
}

TEST(MoeLayer, NoVisualTokensMeansDenseLayer) {
    const StackWeights w = StackWeights::random(small_shape(), 1);
    Rng rng(2);
    const Matrix x = random_normal(5, 16, rng);
    const MoeOutput out = moe_layer_forward(x, std::vector<bool>(5, false), w.layers[0], {});
    EXPECT_EQ(out.hidden, dense_layer_forward(x, w.layers[0]));
    EXPECT_TRUE(out.decisions.empty());
}

TEST(MoeLayer, ZeroExpertsReproduceDenseLayerBitExactly) {
    StackWeights w = StackWeights::random(small_shape(), 1);
    for (auto& e : w.layers[0].experts) {
        std::ranges::fill(e.up.data(), 0.0);
        std::ranges::fill(e.down.data(), 0.0);
    }
    Rng rng(3);
    const Matrix x = random_normal(7, 16, rng);
    std::vector<bool> mask = {true, false, true, true, false, true, true};
    EXPECT_EQ(moe_layer_forward(x, mask, w.layers[0], {}).hidden, dense_layer_forward(x, w.layers[0]));
}

TEST(MoeLayer, MaskLengthMismatch) {
    const StackWeights w = StackWeights::random(small_shape(), 1);
    EXPECT_THROW(moe_layer_forward(Matrix(3, 16), std::vector<bool>(2, true), w.layers[0], {}), ShapeError);
}

TEST(MoeLayer, HandComputedSingleVisualToken) {
    // dim 4, global FFN width 2, two experts of width 1, top-1 routing, no pre-norm.
    LayerWeights w;
    w.global.up = Matrix::from_rows({{1, 0}, {0, 1}, {0, 0}, {1, 1}});
    w.global.down = Matrix::from_rows({{1, 0, 0, 0}, {0, 0, 1, 0}});
    w.experts.push_back({Matrix::from_rows({{1}, {0}, {0}, {0}}), Matrix::from_rows({{0, 2, 0, 0}})});
    w.experts.push_back({Matrix::from_rows({{0}, {1}, {0}, {0}}), Matrix::from_rows({{0, 0, 0, 3}})});
    w.router = Matrix::from_rows({{1, 0}, {0, 1}, {0, 0}, {0, 0}});
    const Matrix x = Matrix::from_rows({{0.5, -0.25, 1.0, 0.2}});

    auto g = [](double v) { return 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v))); };
    const double h0 = g(0.5 + 0.2), h1 = g(-0.25 + 0.2);
    // Router logits (0.5, -0.25): expert 0 wins; renormalised top-1 weight is 1.
    const double e0 = g(0.5);
    const std::vector<double> expected = {0.5 + h0, -0.25 + 2.0 * e0, 1.0 + h1, 0.2};

    const MoeOutput out = moe_layer_forward(x, {true}, w, {.topk = 1, .renormalize = true, .pre_norm = false});
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.hidden(0, c), expected[c], 1e-12);
    const double w0 = std::exp(0.5) / (std::exp(0.5) + std::exp(-0.25));
    EXPECT_NEAR(out.decisions[0].weights[0], w0, 1e-12);

    const MoeOutput raw = moe_layer_forward(x, {true}, w, {.topk = 1, .renormalize = false, .pre_norm = false});
    EXPECT_NEAR(raw.hidden(0, 1), -0.25 + 2.0 * w0 * e0, 1e-12);
}

TEST(Prune, ZeroRateKeepsEverything) {
    const VisualTokens t = random_tokens(20, 4, 1);
    std::vector<double> s(20, 0.5);
    const PruneResult r = prune_layer(t, s, HteConfig{.drop_rate = 0.0}, 3);
    EXPECT_EQ(r.kept.size(), 20u);
    EXPECT_TRUE(r.record.dropped.empty());
    EXPECT_EQ(r.record.layer_index, 3u);
}

TEST(Prune, HundredTokensTenPercentMatchesSortOracle) {
    const VisualTokens t = random_tokens(100, 4, 2);
    Rng rng(3);
    std::vector<double> s(100);
    for (double& v : s) v = rng.uniform();
    const PruneResult r = prune_layer(t, s, HteConfig{.drop_rate = 0.1}, 0);
    EXPECT_EQ(r.kept.size(), 90u);
    std::vector<std::size_t> dropped;
    for (const auto& d : r.record.dropped) dropped.push_back(d.token_id);
    EXPECT_EQ(dropped, oracle::sort_drop_set(s, t.ids, 0.1));
    EXPECT_TRUE(std::is_sorted(r.kept.ids.begin(), r.kept.ids.end()));
}

TEST(Prune, TiesDropHigherIdFirst) {
    const VisualTokens t = random_tokens(4, 2, 0);
    const std::vector<double> s = {0.3, 0.3, 0.3, 0.9};
    const PruneResult r = prune_layer(t, s, HteConfig{.drop_rate = 0.5}, 0);
    ASSERT_EQ(r.record.dropped.size(), 2u);
    EXPECT_EQ(r.record.dropped[0].token_id, 1u);
    EXPECT_EQ(r.record.dropped[1].token_id, 2u);
}

TEST(Prune, ThresholdDropsAtOrBelowTau) {
    const VisualTokens t = random_tokens(5, 2, 0);
    const std::vector<double> s = {0.2, 0.5, 0.25, 0.7, 0.1};
    const PruneResult r = prune_layer(t, s, HteConfig{.mode = PruneMode::kThreshold, .threshold = 0.25}, 0);
    EXPECT_EQ(r.kept.ids, (std::vector<std::size_t>{1, 3}));
}

TEST(Prune, DroppedRecordCarriesPositionAndHidden) {
    const VisualTokens t = random_tokens(10, 3, 4);
    std::vector<double> s(10);
    std::iota(s.begin(), s.end(), 1.0);
    const PruneResult r = prune_layer(t, s, HteConfig{.drop_rate = 0.2}, 0);
    ASSERT_EQ(r.record.dropped.size(), 2u);
    const auto& d = r.record.dropped[0];
    EXPECT_EQ(d.token_id, 0u);
    EXPECT_EQ(*d.position, t.positions[0]);
    EXPECT_EQ(d.hidden, std::vector<double>(t.hidden.row(0).begin(), t.hidden.row(0).end()));
}

TEST(Prune, ConfigAndShapeErrors) {
    const VisualTokens t = random_tokens(4, 2, 0);
    const std::vector<double> s(4, 0.5);
    EXPECT_THROW(prune_layer(t, s, HteConfig{.drop_rate = 1.0}, 0), ConfigError);
    EXPECT_THROW(prune_layer(t, s, HteConfig{.mode = PruneMode::kThreshold, .threshold = -0.1}, 0), ConfigError);
    EXPECT_THROW(prune_layer(t, std::vector<double>(3, 0.5), HteConfig{}, 0), ShapeError);
}

TEST(Prune, MaxSaliencyOrderSurvivesLogitScalingForTwoExperts) {
    // With two experts the max weight is a monotone function of |logit gap|.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const Matrix x = random_normal(30, 6, rng);
        const Matrix w = random_normal(6, 2, rng);
        Matrix w_scaled = w;
        for (double& v : w_scaled.data()) v *= 3.7;
        const VisualTokens t = random_tokens(30, 2, seed);
        auto kept = [&](const Matrix& router) {
            std::vector<double> s;
            for (const auto& d : router_forward(x, router, 1)) s.push_back(token_saliency(d, ScoreFn::kMax));
            return prune_layer(t, s, HteConfig{.drop_rate = 0.3}, 0).kept.ids;
        };
        EXPECT_EQ(kept(w), kept(w_scaled)) << "seed " << seed;
    }
}

TEST(Prune, MaxSaliencyOrderCanFlipUnderScalingWithFourExperts) {
    // Beyond two experts the order is only scale-invariant while the softmax
    // order is preserved: here a 0.1 scale swaps which token is more salient.
    const Matrix logits = Matrix::from_rows({{2.0, 0.0, 0.0, 0.0}, {1.5, 1.5, -10.0, -10.0}});
    auto max_weight = [](const Matrix& l, std::size_t t) {
        std::vector<double> p(l.row(t).begin(), l.row(t).end());
        softmax_inplace(p);
        return *std::ranges::max_element(p);
    };
    EXPECT_GT(max_weight(logits, 0), max_weight(logits, 1));
    Matrix scaled = logits;
    for (double& v : scaled.data()) v *= 0.1;
    EXPECT_LT(max_weight(scaled, 0), max_weight(scaled, 1));
}

TEST(LayerSchedule, Variants) {
    const LlmShape s = LlmShape::toy();
    std::vector<std::size_t> second(14);
    std::iota(second.begin(), second.end(), 14);
    EXPECT_EQ(layer_schedule(s, {.schedule = Schedule::kSecondHalf}), second);
    EXPECT_EQ(layer_schedule(s, {.schedule = Schedule::kDense}).size(), 28u);
    EXPECT_EQ(layer_schedule(s, {.schedule = Schedule::kFirstHalf}).back(), 13u);
    EXPECT_EQ(layer_schedule(s, {.schedule = Schedule::kSparse, .sparse_step = 4}),
              (std::vector<std::size_t>{0, 4, 8, 12, 16, 20, 24}));
    LlmShape odd = s;
    odd.n_layers = 5;
    EXPECT_EQ(layer_schedule(odd, {.schedule = Schedule::kSecondHalf}), (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(layer_schedule(odd, {.schedule = Schedule::kFirstHalf}), (std::vector<std::size_t>{0, 1}));
}

TEST(LoadBalance, UniformIsOneCollapsedIsN) {
    RouterDecision uniform{.weights = {0.25, 0.25, 0.25, 0.25}, .selected = {0, 1}};
    const std::vector<RouterDecision> u(7, uniform);
    EXPECT_EQ(load_balance_loss(u), 1.0);

    RouterDecision collapsed{.weights = {1.0, 0.0, 0.0, 0.0}, .selected = {0, 1}};
    const std::vector<RouterDecision> c(5, collapsed);
    EXPECT_EQ(load_balance_loss(c), 4.0);

    EXPECT_THROW(load_balance_loss(std::vector<RouterDecision>{}), DegenerateInputError);
}

TEST(LoadBalance, MatchesDirectFormula) {
    Rng rng(8);
    const auto d = router_forward(random_normal(40, 8, rng), random_normal(8, 4, rng), 2);
    std::vector<std::vector<double>> w;
    std::vector<std::size_t> top1;
    for (const auto& x : d) {
        w.push_back(x.weights);
        top1.push_back(x.selected[0]);
    }
    EXPECT_NEAR(load_balance_loss(d), oracle::load_balance_direct(w, top1), 1e-9);
}

class StackTest : public ::testing::Test {
protected:
    FeatureMap visual(std::size_t n, std::uint64_t seed) const {
        Rng rng(seed);
        return FeatureMap::from_grid(1, n, random_normal(n, 16, rng));
    }
    Matrix text(std::size_t n) const {
        Rng rng(99);
        return random_normal(n, 16, rng);
    }
    StackWeights weights = StackWeights::random(small_shape(), 3);
};

TEST_F(StackTest, ZeroDropRateKeepsCountsConstant) {
    for (auto sched : {Schedule::kDense, Schedule::kSecondHalf, Schedule::kSparse}) {
        const StackResult r = run_stack(weights, visual(30, 1), text(4), {.schedule = sched, .drop_rate = 0.0});
        for (std::size_t c : r.layer_counts) EXPECT_EQ(c, 30u);
        EXPECT_EQ(r.final_count, 30u);
    }
}

TEST_F(StackTest, CountsMonotoneTextImmuneRecordsPartition) {
    const StackResult r = run_stack(weights, visual(40, 2), text(5), {.schedule = Schedule::kDense, .drop_rate = 0.2});
    EXPECT_TRUE(std::is_sorted(r.layer_counts.rbegin(), r.layer_counts.rend()));
    EXPECT_EQ(r.text.rows(), 5u);
    ASSERT_EQ(r.records.size(), 6u);
    std::set<std::size_t> all;
    for (std::size_t l = 0; l < r.records.size(); ++l) {
        const auto& rec = r.records[l];
        const std::size_t in = r.layer_counts[l];
        EXPECT_EQ(rec.dropped.size() + rec.kept_count, in);
        EXPECT_EQ(rec.dropped.size(), drop_count(0.2, in));
        for (const auto& d : rec.dropped) EXPECT_TRUE(all.insert(d.token_id).second);
    }
    for (std::size_t id : r.visual.ids) EXPECT_TRUE(all.insert(id).second);
    EXPECT_EQ(all.size(), 40u);
    EXPECT_EQ(r.aux_losses.size(), 6u);
}

TEST_F(StackTest, GeometricLawWithinFloorError) {
    const StackResult r = run_stack(weights, visual(200, 3), text(2), {.schedule = Schedule::kDense, .drop_rate = 0.1});
    const double expected = 200.0 * std::pow(0.9, 6);
    EXPECT_LE(std::abs(static_cast<double>(r.final_count) - expected), 6.0);
}

TEST_F(StackTest, DeterministicAndObserved) {
    std::vector<std::size_t> seen;
    const HteConfig cfg{.schedule = Schedule::kSecondHalf, .drop_rate = 0.25};
    const StackResult a = run_stack(weights, visual(24, 4), text(3), cfg,
                                    [&](const LayerObservation& o) { seen.push_back(o.visual_out->size()); });
    const StackResult b = run_stack(weights, visual(24, 4), text(3), cfg);
    EXPECT_EQ(a.visual.hidden, b.visual.hidden);
    EXPECT_EQ(a.text, b.text);
    ASSERT_EQ(seen.size(), 6u);
    EXPECT_EQ(seen.back(), a.final_count);
}

TEST_F(StackTest, RejectsEmptyOrMisshapedInput) {
    EXPECT_THROW(run_stack(weights, FeatureMap{}, text(2), {}), DegenerateInputError);
    Rng rng(0);
    EXPECT_THROW(run_stack(weights, FeatureMap::from_grid(1, 3, random_normal(3, 8, rng)), text(2), {}), ShapeError);
}

TEST(LlmShape, Validation) {
    EXPECT_NO_THROW(LlmShape::toy().validate());
    EXPECT_NO_THROW(LlmShape::reference().validate());
    LlmShape s = LlmShape::toy();
    s.n_heads = 5;
    EXPECT_THROW(s.validate(), ConfigError);
    s = LlmShape::toy();
    s.router_topk = 5;
    EXPECT_THROW(s.validate(), ConfigError);
    s = LlmShape::toy();
    s.expert_ffn_dim = 1000;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Enums, RoundTripNames) {
    for (auto s : {Schedule::kFirstHalf, Schedule::kSecondHalf, Schedule::kDense, Schedule::kSparse})
        EXPECT_EQ(parse_schedule(to_string(s)), s);
    for (auto f : {ScoreFn::kMax, ScoreFn::kSum, ScoreFn::kRandom}) EXPECT_EQ(parse_score_fn(to_string(f)), f);
    EXPECT_THROW(parse_prune_mode("sometimes"), ConfigError);
}

}  // namespace
}  // namespace tokcompact::hte
