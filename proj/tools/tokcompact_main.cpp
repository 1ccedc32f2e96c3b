// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0
//
// tokcompact command line.
//
//   tokcompact run   --config cfg.json
//   tokcompact sweep --axis drop_rate --values 0,0.05,0.1 [--config cfg.json]
//   tokcompact synth --seed 0 --grid 24 --dim 32 --rho 0.7 --out feats/
//   tokcompact plot  --report out/report.json
//
// TOKCOMPACT_OUT_DIR overrides the output directory of run, sweep and plot.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 internal error.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "tokcompact/atomic_write.hpp"
#include "tokcompact/config.hpp"
#include "tokcompact/error.hpp"
#include "tokcompact/features_io.hpp"
#include "tokcompact/pipeline.hpp"
#include "tokcompact/plots.hpp"
#include "tokcompact/synth.hpp"

namespace fs = std::filesystem;
using namespace tokcompact;

namespace {

constexpr const char* kOutDirEnv = "TOKCOMPACT_OUT_DIR";

std::optional<fs::path> env_out_dir() {
    const char* v = std::getenv(kOutDirEnv);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return fs::path(v);
}

PipelineConfig config_or_default(const std::string& path) {
    PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_config(path);
    if (auto dir = env_out_dir()) cfg.output_dir = *dir;
    cfg.validate();
    return cfg;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    for (const auto& v : out)
        if (v.empty()) throw ConfigError("--values: empty entry in '" + s + "'");
    return out;
}

int cmd_run(const std::string& config_path) {
    const PipelineConfig cfg = config_or_default(config_path);
    const PipelineResult result = run_pipeline(cfg);
    write_files_atomically(render_outputs(result, cfg, cfg.output_dir));
    std::cout << "tokens: " << result.unified_tokens << " after fusion (" << format_number(result.input_pct())
              << "%), " << result.final_tokens << " after the last layer (" << format_number(result.final_pct())
              << "%)\n"
              << "report: " << (cfg.output_dir / "report.json").string() << '\n';
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis, const std::string& values) {
    const PipelineConfig cfg = config_or_default(config_path);
    const auto rows = sweep(cfg, axis, split_csv(values));
    const std::string csv = sweep_csv(axis, rows);
    const fs::path out = cfg.output_dir / ("sweep_" + axis + ".csv");
    write_files_atomically({{out, csv}});
    std::cout << csv;
    return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& grid, const std::string& out, const std::string& dtype) {
    SynthSpec s = spec;
    const auto x = grid.find('x');
    try {
        s.height = std::stoul(grid.substr(0, x));
        s.width = x == std::string::npos ? s.height : std::stoul(grid.substr(x + 1));
    } catch (const std::exception&) {
        throw ConfigError("--grid expects N or HxW, got '" + grid + "'");
    }
    if (dtype != "f32" && dtype != "f64") throw ConfigError("--dtype must be f32 or f64");
    const auto [main, extra] = synth_features(s);
    const Dtype dt = dtype == "f32" ? Dtype::kF32 : Dtype::kF64;
    std::cout << save_features(main, out, "main", dt).string() << '\n'
              << save_features(extra, out, "extra", dt).string() << '\n';
    return 0;
}

int cmd_plot(const std::string& report_path, const std::string& out) {
    std::ifstream in(report_path, std::ios::binary);
    if (!in) throw DataError("cannot open report '" + report_path + "'");
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    nlohmann::ordered_json report;
    try {
        report = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("report is not valid JSON", e.byte);
    }
    fs::path dir = fs::path(report_path).parent_path();
    if (!out.empty()) dir = out;
    if (auto env = env_out_dir()) dir = *env;
    const auto files = render_density_plots(report, dir);
    write_files_atomically(files);
    for (const auto& [path, _] : files) std::cout << path.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Token compaction engine and analysis harness"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run the full pipeline and write a report");
    run->add_option("--config", config_path, "JSON config file")->required();

    std::string sweep_config, axis, values;
    auto* sw = app.add_subcommand("sweep", "Run the pipeline once per value of one axis and emit CSV");
    sw->add_option("--config", sweep_config, "JSON config file (defaults when omitted)");
    sw->add_option("--axis", axis, "drop_rate | k_self | k_cross | omega | merge_ratios")->required();
    sw->add_option("--values", values, "comma-separated values; merge_ratios takes k_self:k_cross pairs")->required();

    SynthSpec spec;
    std::string grid = "24", synth_out, dtype = "f64";
    auto* sy = app.add_subcommand("synth", "Write a synthetic pair of feature files");
    sy->add_option("--seed", spec.seed, "RNG seed");
    sy->add_option("--grid", grid, "grid side N or HxW");
    sy->add_option("--dim", spec.dim, "channels per token");
    sy->add_option("--rho", spec.rho, "branch correlation in [0, 1]");
    sy->add_option("--dtype", dtype, "payload type f32 | f64");
    sy->add_option("--out", synth_out, "output directory")->required();

    std::string report_path, plot_out;
    auto* pl = app.add_subcommand("plot", "Render SVG charts from a report");
    pl->add_option("--report", report_path, "report.json")->required();
    pl->add_option("--out", plot_out, "output directory (defaults to the report's)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(config_path);
        if (*sw) return cmd_sweep(sweep_config, axis, values);
        if (*sy) return cmd_synth(spec, grid, synth_out, dtype);
        if (*pl) return cmd_plot(report_path, plot_out);
    } catch (const Error& e) {
        std::cerr << "tokcompact: " << to_string(e.kind()) << ": " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "tokcompact: internal error: " << e.what() << '\n';
        return 4;
    }
    return 4;
}
