// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/synth.hpp"

#include <cmath>
#include <numbers>

#include "tokcompact/error.hpp"
#include "tokcompact/rng.hpp"
#include "tokcompact/streams.hpp"

namespace tokcompact {

namespace {

constexpr std::size_t kModes = 6;
constexpr double kMaxCycles = 2.0;  // per grid side

// Each channel is a sum of a few random plane waves of at most two cycles per side.
Matrix smooth_field(std::uint64_t seed, std::uint64_t stream, std::size_t h, std::size_t w, std::size_t dim) {
    Rng rng(seed, stream);
    Matrix out(h * w, dim);
    const double amp = std::sqrt(2.0 / static_cast<double>(kModes));
    for (std::size_t c = 0; c < dim; ++c) {
        for (std::size_t m = 0; m < kModes; ++m) {
            const double fy = kMaxCycles * (2.0 * rng.uniform() - 1.0);
            const double fx = kMaxCycles * (2.0 * rng.uniform() - 1.0);
            const double phase = 2.0 * std::numbers::pi * rng.uniform();
            for (std::size_t r = 0; r < h; ++r) {
                for (std::size_t q = 0; q < w; ++q) {
                    const double t = fy * static_cast<double>(r) / static_cast<double>(h) +
                                     fx * static_cast<double>(q) / static_cast<double>(w);
                    out(r * w + q, c) += amp * std::cos(2.0 * std::numbers::pi * t + phase);
                }
            }
        }
    }
    return out;
}

}  // namespace

std::pair<FeatureMap, FeatureMap> synth_features(const SynthSpec& spec) {
    if (spec.height == 0 || spec.width == 0 || spec.dim == 0) throw ConfigError("synth: grid and dim must be positive");
    if (!(spec.rho >= 0.0 && spec.rho <= 1.0)) throw ConfigError("synth: rho must lie in [0, 1]");
    if (!(spec.noise >= 0.0)) throw ConfigError("synth: noise must be non-negative");

    const std::size_t n = spec.height * spec.width;
    const Matrix shared = smooth_field(spec.seed, streams::kSynthShared, spec.height, spec.width, spec.dim);
    const Matrix own = smooth_field(spec.seed, streams::kSynthExtraOwn, spec.height, spec.width, spec.dim);
    Rng main_noise(spec.seed, streams::kSynthMainNoise);
    Rng extra_noise(spec.seed, streams::kSynthExtraNoise);

    Matrix main(n, spec.dim);
    Matrix extra(n, spec.dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < spec.dim; ++c) {
            main(i, c) = shared(i, c) + spec.noise * main_noise.normal();
            extra(i, c) = spec.rho * shared(i, c) + (1.0 - spec.rho) * own(i, c) + spec.noise * extra_noise.normal();
        }
    }
    return {FeatureMap::from_grid(spec.height, spec.width, std::move(main)),
            FeatureMap::from_grid(spec.height, spec.width, std::move(extra))};
}

}  // namespace tokcompact
