// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "tokcompact/error.hpp"
#include "tokcompact/features_io.hpp"
#include "tokcompact/pipeline.hpp"
#include "tokcompact/plots.hpp"
#include "tokcompact/synth.hpp"

namespace tokcompact {
namespace {

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.features.height = 12;
    cfg.features.width = 12;
    cfg.features.dim = 16;
    cfg.llm.n_layers = 8;
    cfg.llm.hidden_dim = 32;
    cfg.llm.ffn_dim = 64;
    cfg.llm.expert_ffn_dim = 32;
    cfg.text_tokens = 4;
    return cfg;
}

TEST(Pipeline, DefaultRunMatchesAnalyticSchedule) {
    const PipelineResult r = run_pipeline(PipelineConfig{});
    EXPECT_EQ(r.base_tokens, 576u);
    EXPECT_EQ(r.unified_tokens, 188u);
    EXPECT_EQ(r.final_tokens, 46u);
    EXPECT_EQ(r.layer_counts.size(), 28u);
    EXPECT_EQ(r.density.per_layer.size(), 28u);
    EXPECT_TRUE(r.report["schedule"]["matches_observed"].get<bool>());
    EXPECT_EQ(r.n_pruned, 188u - 46u);
    EXPECT_NEAR(r.input_pct(), 100.0 * 188.0 / 576.0, 1e-12);
}

TEST(Pipeline, ReportIsDeterministicOnceTimingIsStripped) {
    const PipelineConfig cfg = small_config();
    const PipelineResult a = run_pipeline(cfg);
    const PipelineResult b = run_pipeline(cfg);
    EXPECT_EQ(a.report.dump(), b.report.dump());
    const auto timed = report_with_timing(a);
    EXPECT_EQ((--timed.end()).key(), "timing");
    EXPECT_EQ(strip_timing(timed).dump(), a.report.dump());
    EXPECT_EQ(a.report["schema_version"], kReportSchemaVersion);
}

TEST(Pipeline, BypassDoublesTokens) {
    PipelineConfig cfg = small_config();
    cfg.mke.bypass = true;
    cfg.hte.drop_rate = 0.0;
    const PipelineResult r = run_pipeline(cfg);
    EXPECT_EQ(r.unified_tokens, 288u);
    EXPECT_DOUBLE_EQ(r.input_pct(), 200.0);
    EXPECT_DOUBLE_EQ(r.final_pct(), 200.0);
}

TEST(Pipeline, FileFeaturesMatchSyntheticOnes) {
    testing::TempDir tmp;
    PipelineConfig cfg = small_config();
    const auto [main, extra] = synth_features(
        {.seed = cfg.seed, .height = 12, .width = 12, .dim = 16, .rho = cfg.features.rho});
    PipelineConfig files = cfg;
    files.features.source = FeatureSource::kFiles;
    files.features.main_path = save_features(main, tmp.path(), "main");
    files.features.extra_path = save_features(extra, tmp.path(), "extra");
    const PipelineResult a = run_pipeline(cfg);
    const PipelineResult b = run_pipeline(files);
    EXPECT_EQ(a.final_tokens, b.final_tokens);
    EXPECT_EQ(a.report["density"].dump(), b.report["density"].dump());
}

TEST(Pipeline, ErrorsCarryKindAndStage) {
    PipelineConfig cfg = small_config();
    cfg.features.source = FeatureSource::kFiles;
    cfg.features.main_path = "/nonexistent/main.json";
    cfg.features.extra_path = "/nonexistent/extra.json";
    try {
        run_pipeline(cfg);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kData);
        EXPECT_EQ(std::string(e.what()).rfind("[features]", 0), 0u) << e.what();
    }
    cfg = small_config();
    cfg.hte.drop_rate = 2.0;
    try {
        run_pipeline(cfg);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    }
}

TEST(Pipeline, RenderOutputsFollowFormats) {
    PipelineConfig cfg = small_config();
    const PipelineResult r = run_pipeline(cfg);
    const auto all = render_outputs(r, cfg, "o");
    std::vector<std::string> names;
    for (const auto& [path, body] : all) names.push_back(path.filename().string());
    EXPECT_EQ(names, (std::vector<std::string>{"report.json", "density.csv", "tokens.svg", "stable_rank.svg",
                                               "coding_rate.svg"}));
    for (const auto& [path, body] : all)
        if (path.extension() == ".svg") EXPECT_EQ(oracle::validate_svg(body, 1), "") << path;
    std::istringstream csv(all[1].second);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(csv, line)) ++lines;
    EXPECT_EQ(lines, 1u + cfg.llm.n_layers);

    cfg.formats = {"json"};
    EXPECT_EQ(render_outputs(r, cfg, "o").size(), 1u);
}

TEST(Sweep, RowsEqualIndependentRuns) {
    const PipelineConfig cfg = small_config();
    const std::vector<std::string> values = {"0.05", "0.2"};
    const auto rows = sweep(cfg, "drop_rate", values);
    ASSERT_EQ(rows.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        const SweepRow want = sweep_row(values[i], run_pipeline(apply_axis(cfg, "drop_rate", values[i])));
        EXPECT_EQ(sweep_csv("drop_rate", {rows[i]}), sweep_csv("drop_rate", {want}));
    }
    EXPECT_GT(rows[0].final_tokens, rows[1].final_tokens);
}

TEST(Sweep, EmptyValuesGiveHeaderOnly) {
    const auto rows = sweep(small_config(), "omega", {});
    EXPECT_TRUE(rows.empty());
    const std::string csv = sweep_csv("omega", rows);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
    EXPECT_EQ(csv.rfind("omega,", 0), 0u);
}

TEST(Sweep, AxisParsing) {
    const PipelineConfig cfg = apply_axis(small_config(), "merge_ratios", "0.3:0.6");
    EXPECT_DOUBLE_EQ(cfg.mke.k_self, 0.3);
    EXPECT_DOUBLE_EQ(cfg.mke.k_cross, 0.6);
    EXPECT_THROW(apply_axis(cfg, "temperature", "1"), ConfigError);
    EXPECT_THROW(apply_axis(cfg, "omega", "lots"), ConfigError);
    EXPECT_THROW(apply_axis(cfg, "omega", "1.5"), ConfigError);
    EXPECT_THROW(apply_axis(cfg, "merge_ratios", "0.3"), ConfigError);
}

TEST(FormatNumber, ShortestRoundTrip) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(2.0), "2");
    EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

std::vector<std::pair<double, double>> polyline_points(const std::string& svg) {
    std::smatch m;
    EXPECT_TRUE(std::regex_search(svg, m, std::regex("points=\"([^\"]*)\"")));
    std::vector<std::pair<double, double>> pts;
    std::istringstream in(m[1].str());
    std::string pair;
    while (in >> pair) {
        const auto comma = pair.find(',');
        pts.push_back({std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1))});
    }
    return pts;
}

TEST(Plots, FlatAndDecreasingSeries) {
    const std::vector<double> xs = {0, 1, 2, 3};
    const std::vector<double> flat = {5, 5, 5, 5};
    const std::string a = render_line_svg("flat", "x", "y", xs, flat);
    EXPECT_EQ(oracle::validate_svg(a, 1), "");
    const auto pa = polyline_points(a);
    ASSERT_EQ(pa.size(), 4u);
    for (const auto& p : pa) EXPECT_EQ(p.second, pa[0].second);

    const std::vector<double> falling = {100, 90, 90, 40};
    const auto pb = polyline_points(render_line_svg("falling", "x", "y", xs, falling));
    for (std::size_t i = 1; i < pb.size(); ++i) {
        EXPECT_GT(pb[i].first, pb[i - 1].first);
        EXPECT_GE(pb[i].second, pb[i - 1].second);  // SVG y grows downwards
    }
    EXPECT_THROW(render_line_svg("bad", "x", "y", xs, std::vector<double>{1}), ShapeError);
}

TEST(Plots, EscapesLabelsAndRejectsMissingDensity) {
    const std::vector<double> one = {1};
    const std::string svg = render_line_svg("a<b & c", "x", "y", one, one);
    EXPECT_NE(svg.find("a&lt;b &amp; c"), std::string::npos);
    EXPECT_EQ(oracle::validate_svg(svg, 1), "");
    EXPECT_THROW(render_density_plots(nlohmann::ordered_json::object(), "o"), ConfigError);
    EXPECT_THROW(render_density_plots(nlohmann::ordered_json{{"density", {{{"layer", 0}}}}}, "o"), ConfigError);
}

}  // namespace
}  // namespace tokcompact
