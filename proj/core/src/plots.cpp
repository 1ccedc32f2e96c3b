// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/plots.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "tokcompact/error.hpp"

namespace tokcompact {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fmt_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_line_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                            std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ShapeError("render_line_svg: x and y lengths differ");
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    if (!xs.empty()) {
        const auto [xmin, xmax] = std::ranges::minmax(xs);
        const auto [ymin, ymax] = std::ranges::minmax(ys);
        x0 = xmin;
        x1 = xmax > xmin ? xmax : xmin + 1.0;
        y0 = std::min(0.0, ymin);
        y1 = ymax > y0 ? ymax : y0 + 1.0;
    }
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
      << "  <text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape(title)
      << "</text>\n"
      << "  <line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
      << "\" stroke=\"black\"/>\n"
      << "  <text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << escape(x_label) << "</text>\n"
      << "  <text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << kTop + ph / 2 << ")\">" << escape(y_label) << "</text>\n"
      << "  <text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
      << fmt_label(y1) << "</text>\n"
      << "  <text x=\"" << kLeft - 6 << "\" y=\"" << kTop + ph << "\" text-anchor=\"end\" font-size=\"10\">"
      << fmt_label(y0) << "</text>\n"
      << "  <text x=\"" << kLeft << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << fmt_label(x0) << "</text>\n"
      << "  <text x=\"" << kLeft + pw << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << fmt_label(x1) << "</text>\n"
      << "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) s << (i ? " " : "") << fmt(px(xs[i])) << ',' << fmt(py(ys[i]));
    s << "\"/>\n</svg>\n";
    return s.str();
}

std::vector<FileContents> render_density_plots(const nlohmann::ordered_json& report,
                                               const std::filesystem::path& out_dir) {
    if (!report.is_object() || !report.contains("density") || !report["density"].is_array()) {
        throw ConfigError("plot: report has no density profile");
    }
    std::vector<double> layer, tokens, srank, crate;
    try {
        for (const auto& row : report["density"]) {
            layer.push_back(row.at("layer").get<double>());
            tokens.push_back(row.at("tokens").get<double>());
            srank.push_back(row.at("stable_rank").get<double>());
            crate.push_back(row.at("coding_rate").get<double>());
        }
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("plot: malformed density profile");
    }
    return {
        {out_dir / "tokens.svg", render_line_svg("Visual tokens per layer", "layer", "tokens", layer, tokens)},
        {out_dir / "stable_rank.svg", render_line_svg("Stable rank per layer", "layer", "stable rank", layer, srank)},
        {out_dir / "coding_rate.svg", render_line_svg("Coding rate per layer", "layer", "coding rate", layer, crate)},
    };
}

}  // namespace tokcompact
