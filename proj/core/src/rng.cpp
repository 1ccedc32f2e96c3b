// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/rng.hpp"

#include <cmath>
#include <numbers>

namespace tokcompact {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace

std::uint64_t Rng::hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    std::uint64_t key = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
    key = splitmix64(key ^ stream);
    return splitmix64(key ^ (counter * 0xd1b54a32d192ed03ULL));
}

double Rng::uniform() noexcept { return to_unit(next_u64()); }

double Rng::normal() noexcept {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    return to_unit(Rng::hash(seed, stream, counter));
}

Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

}  // namespace tokcompact
