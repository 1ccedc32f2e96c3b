// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "tokcompact/matrix.hpp"

namespace tokcompact {

inline constexpr std::string_view kRngAlgorithm = "splitmix64-counter";

struct RngState {
    std::uint64_t seed = 0;
    std::string algorithm{kRngAlgorithm};
};

// Counter-based generator: draw i of stream s is splitmix64(seed, s, i), so any
// draw can be reproduced without replaying the stream. Only integer arithmetic
// and IEEE operations are used, which keeps streams identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    static std::uint64_t hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;

    std::uint64_t next_u64() noexcept { return hash(seed_, stream_, counter_++); }
    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    // Standard normal via Box-Muller.
    double normal() noexcept;

    RngState state() const { return RngState{seed_, std::string(kRngAlgorithm)}; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

// Uniform in [0, 1) for a single (seed, stream, counter) coordinate.
double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;

Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0);

}  // namespace tokcompact
