// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tokcompact/hte.hpp"
#include "tokcompact/mke.hpp"
#include "tokcompact/sip.hpp"

namespace tokcompact {

enum class FeatureSource { kSynthetic, kFiles };

struct FeatureSpec {
    FeatureSource source = FeatureSource::kSynthetic;
    std::size_t height = 24;
    std::size_t width = 24;
    std::size_t dim = 32;
    double rho = 0.7;
    std::filesystem::path main_path;   // files only: header of the main branch
    std::filesystem::path extra_path;  // files only: header of the extra branch
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    FeatureSpec features;
    mke::MkeConfig mke;
    hte::HteConfig hte;
    sip::SipConfig sip;
    hte::LlmShape llm;
    std::size_t text_tokens = 16;
    double epsilon = 0.5;  // coding-rate distortion
    std::filesystem::path output_dir = "out";
    std::vector<std::string> formats = {"json", "csv", "svg"};

    // Throws ConfigError on any inconsistency.
    void validate() const;
    bool wants(const std::string& format) const;
};

// Unknown keys and wrong types are config errors. Relative feature paths are
// resolved against `base_dir`.
PipelineConfig config_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);

PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace tokcompact
