// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "tokcompact/hte.hpp"
#include "tokcompact/mke.hpp"
#include "tokcompact/ops.hpp"
#include "tokcompact/rng.hpp"
#include "tokcompact/sip.hpp"
#include "tokcompact/synth.hpp"

namespace tokcompact {
namespace {

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Matrix a = random_normal(n, n, rng), b = random_normal(n, n, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_BipartiteMerge(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    const FeatureMap dst = FeatureMap::from_grid(1, n, random_normal(n, 64, rng));
    const FeatureMap src = FeatureMap::from_grid(1, n, random_normal(n, 64, rng));
    for (auto _ : state) benchmark::DoNotOptimize(mke::bipartite_merge(dst, src, n / 2));
}
BENCHMARK(BM_BipartiteMerge)->Arg(72)->Arg(144)->Arg(288);

void BM_MkeForward(benchmark::State& state) {
    const auto [main, extra] = synth_features({.seed = 3});
    for (auto _ : state) benchmark::DoNotOptimize(mke::mke_forward(main, extra, {}, 64, 3));
}
BENCHMARK(BM_MkeForward);

void BM_RunStack(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const hte::StackWeights w = hte::StackWeights::random(hte::LlmShape::toy(), 4);
    Rng rng(5);
    const FeatureMap visual = FeatureMap::from_grid(1, n, random_normal(n, 64, rng));
    const Matrix text = random_normal(16, 64, rng);
    for (auto _ : state) benchmark::DoNotOptimize(hte::run_stack(w, visual, text, {}));
}
BENCHMARK(BM_RunStack)->Arg(96)->Arg(188)->Unit(benchmark::kMillisecond);

void BM_Propagate(benchmark::State& state) {
    const auto np = static_cast<std::size_t>(state.range(0));
    Rng rng(6);
    const Matrix vc = random_normal(46, 64, rng), vp = random_normal(np, 64, rng);
    for (auto _ : state) benchmark::DoNotOptimize(sip::propagate(vc, vp, {}));
}
BENCHMARK(BM_Propagate)->Arg(64)->Arg(142)->Arg(512);

}  // namespace
}  // namespace tokcompact

BENCHMARK_MAIN();
