// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tokcompact/feature_map.hpp"

namespace tokcompact {

inline constexpr std::string_view kFeatureFormat = "tokcompact-features";
inline constexpr int kFeatureFormatVersion = 1;

enum class Dtype { kF32, kF64 };

// JSON sidecar describing a flat little-endian payload of shape [H, W, D].
struct FeatureHeader {
    std::vector<std::size_t> dims;
    Dtype dtype = Dtype::kF64;
    std::string branch;
    std::string payload;  // file name, relative to the header's directory
};

struct LoadedFeatures {
    FeatureMap map;
    FeatureHeader header;
    std::string digest;  // FNV-1a 64 of the header bytes, hex
};

// FNV-1a 64-bit over `bytes`, as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

// Writes `<dir>/<branch>.json` and `<dir>/<branch>.bin`; returns the header path.
std::filesystem::path save_features(const FeatureMap& f, const std::filesystem::path& dir, const std::string& branch,
                                    Dtype dtype = Dtype::kF64);

// Malformed header -> ParseError with byte offset; payload length mismatch or
// non-finite values -> DataError. Nothing is returned on failure.
LoadedFeatures load_features(const std::filesystem::path& header_path);

}  // namespace tokcompact
