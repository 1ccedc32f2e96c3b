// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "tokcompact/feature_map.hpp"

namespace tokcompact {

struct SynthSpec {
    std::uint64_t seed = 0;
    std::size_t height = 24;
    std::size_t width = 24;
    std::size_t dim = 32;
    double rho = 0.7;  // share of the extra branch drawn from the main branch's field
    double noise = 0.05;
};

// Two smooth token fields over the grid. main = S + noise and
// extra = rho * S + (1 - rho) * E + noise, where S and E are independent
// low-frequency random fields with unit per-entry variance.
std::pair<FeatureMap, FeatureMap> synth_features(const SynthSpec& spec);

}  // namespace tokcompact
