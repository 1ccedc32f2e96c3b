// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "process.hpp"
#include "temp_dir.hpp"
#include "tokcompact/pipeline.hpp"

namespace tokcompact {
namespace {

namespace fs = std::filesystem;
using testing::run_command;
using testing::shell_quote;
using testing::TempDir;

const std::string kCli = TOKCOMPACT_CLI_PATH;

constexpr const char* kSmallConfig = R"({
  "seed": 3,
  "features": {"grid": [12, 12], "dim": 16},
  "llm": {"n_layers": 8, "hidden_dim": 32, "ffn_dim": 64, "expert_ffn_dim": 32},
  "text_tokens": 4
})";

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

testing::ProcessResult cli(const std::string& args, const fs::path& out_dir = {}) {
    std::string cmd;
    if (!out_dir.empty()) cmd = "TOKCOMPACT_OUT_DIR=" + shell_quote(out_dir.string()) + " ";
    return run_command(cmd + shell_quote(kCli) + " " + args);
}

TEST(Cli, RunWritesOutputsUnderEnvOverride) {
    TempDir tmp;
    spit(tmp / "c.json", kSmallConfig);
    const auto r = cli("run --config " + shell_quote((tmp / "c.json").string()), tmp / "out");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    for (const char* f : {"report.json", "density.csv", "tokens.svg", "stable_rank.svg", "coding_rate.svg"})
        EXPECT_TRUE(fs::exists(tmp / "out" / f)) << f;
    EXPECT_FALSE(fs::exists(tmp / "out" / "report.json.partial"));
}

TEST(Cli, RepeatedRunsAreByteIdenticalWithoutTiming) {
    TempDir tmp;
    spit(tmp / "c.json", kSmallConfig);
    const std::string args = "run --config " + shell_quote((tmp / "c.json").string());
    ASSERT_EQ(cli(args, tmp / "a").exit_code, 0);
    ASSERT_EQ(cli(args, tmp / "b").exit_code, 0);
    const auto a = nlohmann::ordered_json::parse(slurp(tmp / "a" / "report.json"));
    const auto b = nlohmann::ordered_json::parse(slurp(tmp / "b" / "report.json"));
    EXPECT_EQ(strip_timing(a).dump(), strip_timing(b).dump());
    EXPECT_EQ(slurp(tmp / "a" / "density.csv"), slurp(tmp / "b" / "density.csv"));
    EXPECT_EQ(slurp(tmp / "a" / "tokens.svg"), slurp(tmp / "b" / "tokens.svg"));
}

TEST(Cli, ConfigErrorsExitTwo) {
    TempDir tmp;
    spit(tmp / "bad.json", R"({"mke": {"k_slef": 0.5}})");
    EXPECT_EQ(cli("run --config " + shell_quote((tmp / "bad.json").string()), tmp / "o").exit_code, 2);
    EXPECT_EQ(cli("run --config " + shell_quote((tmp / "missing.json").string()), tmp / "o").exit_code, 2);
    EXPECT_EQ(cli("run").exit_code, 2);
    EXPECT_EQ(cli("sweep --axis temperature --values 1", tmp / "o").exit_code, 2);
    EXPECT_EQ(cli("synth --grid x --out " + shell_quote(tmp.path().string())).exit_code, 2);
    EXPECT_FALSE(fs::exists(tmp / "o" / "report.json"));
}

TEST(Cli, DataErrorsExitThree) {
    TempDir tmp;
    ASSERT_EQ(cli("synth --seed 1 --grid 12 --dim 16 --out " + shell_quote((tmp / "f").string())).exit_code, 0);
    fs::resize_file(tmp / "f" / "extra.bin", fs::file_size(tmp / "f" / "extra.bin") - 8);
    spit(tmp / "c.json", R"({"features": {"source": "files", "main": "f/main.json", "extra": "f/extra.json"},
                             "llm": {"n_layers": 4}})");
    const auto r = cli("run --config " + shell_quote((tmp / "c.json").string()), tmp / "o");
    EXPECT_EQ(r.exit_code, 3) << r.output;
    EXPECT_FALSE(fs::exists(tmp / "o" / "report.json"));

    spit(tmp / "broken.json", "{\"density\": [");
    EXPECT_EQ(cli("plot --report " + shell_quote((tmp / "broken.json").string())).exit_code, 3);
}

TEST(Cli, SynthThenRunFromFiles) {
    TempDir tmp;
    const auto s = cli("synth --seed 3 --grid 12x12 --dim 16 --rho 0.7 --dtype f32 --out " +
                       shell_quote((tmp / "f").string()));
    ASSERT_EQ(s.exit_code, 0) << s.output;
    EXPECT_TRUE(fs::exists(tmp / "f" / "main.json"));
    spit(tmp / "c.json", R"({"features": {"source": "files", "main": "f/main.json", "extra": "f/extra.json"},
                             "llm": {"n_layers": 8, "hidden_dim": 32, "ffn_dim": 64, "expert_ffn_dim": 32}})");
    const auto r = cli("run --config " + shell_quote((tmp / "c.json").string()), tmp / "o");
    EXPECT_EQ(r.exit_code, 0) << r.output;
}

TEST(Cli, PlotRegeneratesCharts) {
    TempDir tmp;
    spit(tmp / "c.json", kSmallConfig);
    ASSERT_EQ(cli("run --config " + shell_quote((tmp / "c.json").string()), tmp / "o").exit_code, 0);
    const auto before = slurp(tmp / "o" / "tokens.svg");
    const auto r = cli("plot --report " + shell_quote((tmp / "o" / "report.json").string()) + " --out " +
                       shell_quote((tmp / "p").string()));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_EQ(slurp(tmp / "p" / "tokens.svg"), before);
}

TEST(Cli, SweepEmitsOneRowPerValue) {
    TempDir tmp;
    spit(tmp / "c.json", kSmallConfig);
    const auto r = cli("sweep --config " + shell_quote((tmp / "c.json").string()) +
                           " --axis merge_ratios --values 0.5:0.4,0.8:0.5",
                       tmp / "o");
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const std::string csv = slurp(tmp / "o" / "sweep_merge_ratios.csv");
    EXPECT_EQ(csv, r.output);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace tokcompact
