// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "tokcompact/atomic_write.hpp"

namespace tokcompact {

// Standalone SVG line chart with one polyline.
std::string render_line_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                            std::span<const double> xs, std::span<const double> ys);

// tokens.svg, stable_rank.svg and coding_rate.svg from a report's "density"
// array. A report without one is a config error.
std::vector<FileContents> render_density_plots(const nlohmann::ordered_json& report,
                                               const std::filesystem::path& out_dir);

}  // namespace tokcompact
