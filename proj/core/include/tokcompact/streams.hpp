// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

// RNG stream ids. Every consumer of the global seed draws from its own stream.
namespace tokcompact::streams {

inline constexpr std::uint64_t kMainProjection = 1;
inline constexpr std::uint64_t kExtraProjection = 2;
inline constexpr std::uint64_t kTextTokens = 3;
inline constexpr std::uint64_t kSynthShared = 10;
inline constexpr std::uint64_t kSynthExtraOwn = 12;
inline constexpr std::uint64_t kSynthMainNoise = 13;
inline constexpr std::uint64_t kSynthExtraNoise = 14;
inline constexpr std::uint64_t kPowerIteration = 20;
inline constexpr std::uint64_t kRandomScore = 30;
inline constexpr std::uint64_t kLayerWeightsBase = 1000;

}  // namespace tokcompact::streams
