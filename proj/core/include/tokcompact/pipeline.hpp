// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tokcompact/atomic_write.hpp"
#include "tokcompact/config.hpp"
#include "tokcompact/metrics.hpp"

namespace tokcompact {

inline constexpr int kReportSchemaVersion = 1;

// Reference cost setting: one forward pass with 2880 visual and 100 text tokens.
inline constexpr std::size_t kReferenceVisualTokens = 2880;
inline constexpr std::size_t kReferenceTextTokens = 100;

struct PipelineResult {
    nlohmann::ordered_json report;  // deterministic; carries no timing
    double wall_ms = 0.0;

    std::size_t base_tokens = 0;
    std::size_t unified_tokens = 0;
    std::size_t final_tokens = 0;
    std::vector<std::size_t> layer_counts;
    std::vector<std::size_t> pruning_layers;
    metrics::DensityProfile density;
    double flops_g = 0.0;
    double flops_ratio = 0.0;  // against the same stack at a constant base token count
    double qrec = 0.0;
    std::size_t n_pruned = 0;

    double input_pct() const noexcept;
    double final_pct() const noexcept;
};

// Features -> MKE -> HTE stack -> SIP -> metrics. Errors keep their kind and
// gain a "[stage]" prefix. Writes nothing.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// The report with its isolatable "timing" object appended last.
nlohmann::ordered_json report_with_timing(const PipelineResult& result);

// Drops the "timing" object, leaving the byte-stable part.
nlohmann::ordered_json strip_timing(nlohmann::ordered_json report);

// Files for the requested formats: report.json, density.csv, and the SVG plots.
std::vector<FileContents> render_outputs(const PipelineResult& result, const PipelineConfig& cfg,
                                         const std::filesystem::path& out_dir);

// Axes accepted by sweep: drop_rate, k_self, k_cross, omega, and merge_ratios
// whose values are "k_self:k_cross" pairs.
const std::vector<std::string>& sweep_axes();
PipelineConfig apply_axis(PipelineConfig cfg, const std::string& axis, const std::string& value);

struct SweepRow {
    std::string value;
    std::size_t input_tokens = 0;
    std::size_t final_tokens = 0;
    double input_pct = 0.0;
    double final_pct = 0.0;
    double flops_g = 0.0;
    double flops_ratio = 0.0;
    double mean_stable_rank = 0.0;
    double mean_coding_rate = 0.0;
    double qrec = 0.0;
};

SweepRow sweep_row(const std::string& value, const PipelineResult& result);
std::vector<SweepRow> sweep(const PipelineConfig& cfg, const std::string& axis, const std::vector<std::string>& values);
std::string sweep_csv(const std::string& axis, const std::vector<SweepRow>& rows);

// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace tokcompact
