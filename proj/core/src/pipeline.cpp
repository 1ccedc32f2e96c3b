// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <numeric>
#include <sstream>

#include "tokcompact/error.hpp"
#include "tokcompact/features_io.hpp"
#include "tokcompact/hte.hpp"
#include "tokcompact/mke.hpp"
#include "tokcompact/plots.hpp"
#include "tokcompact/rng.hpp"
#include "tokcompact/sip.hpp"
#include "tokcompact/streams.hpp"
#include "tokcompact/synth.hpp"

namespace tokcompact {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Runs one stage, prefixing any failure with the stage name.
template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("[") + name + "] " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorKind::kInternal, std::string("[") + name + "] " + e.what());
    }
}

struct Features {
    FeatureMap main;
    FeatureMap extra;
    json summary;
};

Features acquire_features(const PipelineConfig& cfg) {
    Features f;
    if (cfg.features.source == FeatureSource::kSynthetic) {
        SynthSpec spec{.seed = cfg.seed,
                       .height = cfg.features.height,
                       .width = cfg.features.width,
                       .dim = cfg.features.dim,
                       .rho = cfg.features.rho};
        std::tie(f.main, f.extra) = synth_features(spec);
        f.summary = {{"source", "synthetic"}, {"grid", {spec.height, spec.width}}, {"dim", spec.dim}, {"rho", spec.rho}};
        return f;
    }
    LoadedFeatures main = load_features(cfg.features.main_path);
    LoadedFeatures extra = load_features(cfg.features.extra_path);
    if (main.map.height != extra.map.height || main.map.width != extra.map.width) {
        throw DataError("main and extra feature grids differ");
    }
    f.summary = {{"source", "files"},
                 {"grid", {main.map.height, main.map.width}},
                 {"main", {{"dim", main.map.dim()}, {"dtype", main.header.dtype == Dtype::kF32 ? "f32" : "f64"},
                           {"header_digest", main.digest}}},
                 {"extra", {{"dim", extra.map.dim()}, {"dtype", extra.header.dtype == Dtype::kF32 ? "f32" : "f64"},
                            {"header_digest", extra.digest}}}};
    f.main = std::move(main.map);
    f.extra = std::move(extra.map);
    return f;
}

json trace_summary(const char* name, const mke::MergeTrace& t) {
    double sum = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < t.edges.size(); ++i) {
        const double s = t.edges[i].similarity;
        sum += s;
        lo = i == 0 ? s : std::min(lo, s);
        hi = i == 0 ? s : std::max(hi, s);
    }
    json j = {{"stage", name},
              {"input_tokens", t.input_count},
              {"output_tokens", t.survivors.size()},
              {"merged", t.edges.size()},
              {"rounds", t.rounds},
              {"alpha_mode", t.alpha_mode}};
    if (t.edges.empty()) {
        j["similarity"] = nullptr;
    } else {
        j["similarity"] = {{"mean", sum / static_cast<double>(t.edges.size())}, {"min", lo}, {"max", hi}};
    }
    return j;
}

json flops_json(const metrics::FlopsReport& ven, const metrics::FlopsReport& vanilla) {
    return {{"total_g", ven.total_g},
            {"vanilla_g", vanilla.total_g},
            {"ratio", ven.total_g / vanilla.total_g},
            {"token_ratio_final", ven.token_ratio_final}};
}

template <typename T>
double mean_of(const std::vector<metrics::DensityRow>& rows, T metrics::DensityRow::*field) {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : rows) s += static_cast<double>(r.*field);
    return s / static_cast<double>(rows.size());
}

}  // namespace

double PipelineResult::input_pct() const noexcept {
    return base_tokens == 0 ? 0.0 : 100.0 * static_cast<double>(unified_tokens) / static_cast<double>(base_tokens);
}

double PipelineResult::final_pct() const noexcept {
    return base_tokens == 0 ? 0.0 : 100.0 * static_cast<double>(final_tokens) / static_cast<double>(base_tokens);
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    stage("config", [&] { cfg.validate(); });

    PipelineResult out;
    json& rep = out.report;
    rep["schema_version"] = kReportSchemaVersion;
    // Where the files land is not part of the experiment, so two runs into
    // different directories still produce the same report.
    rep["config"] = config_to_json(cfg);
    rep["config"].erase("output");

    Features feats = stage("features", [&] { return acquire_features(cfg); });
    rep["features"] = feats.summary;
    out.base_tokens = feats.main.token_count();

    const mke::MkeResult fused = stage("mke", [&] {
        return mke::mke_forward(feats.main, feats.extra, cfg.mke, cfg.llm.hidden_dim, cfg.seed);
    });
    out.unified_tokens = fused.unified.token_count();
    {
        json traces = json::array();
        if (fused.traces.size() == 2) {
            traces.push_back(trace_summary("self", fused.traces[0]));
            traces.push_back(trace_summary("cross", fused.traces[1]));
        }
        rep["mke"] = {{"bypass", cfg.mke.bypass},
                      {"main_tokens", fused.main_tokens},
                      {"extra_tokens", fused.extra_tokens},
                      {"extra_after_self", fused.extra_after_self},
                      {"unified_tokens", out.unified_tokens},
                      {"unified_mass", fused.unified.total_mass()},
                      {"traces", traces}};
    }

    hte::StackResult stack = stage("hte", [&] {
        const hte::StackWeights weights = hte::StackWeights::random(cfg.llm, cfg.seed);
        Rng text_rng(cfg.seed, streams::kTextTokens);
        const Matrix text = random_normal(cfg.text_tokens, cfg.llm.hidden_dim, text_rng);
        hte::HteConfig hcfg = cfg.hte;
        hcfg.seed = cfg.seed;
        return hte::run_stack(weights, fused.unified, text, hcfg, [&](const hte::LayerObservation& obs) {
            out.density.per_layer.push_back(
                metrics::density_row(obs.layer, obs.visual_out->hidden, cfg.epsilon, cfg.seed));
        });
    });
    out.layer_counts = stack.layer_counts;
    out.final_tokens = stack.final_count;
    out.pruning_layers = hte::layer_schedule(cfg.llm, cfg.hte);
    {
        json records = json::array();
        std::size_t dropped = 0;
        for (const auto& r : stack.records) {
            records.push_back({{"layer", r.layer_index}, {"dropped", r.dropped.size()}, {"kept", r.kept_count}});
            dropped += r.dropped.size();
        }
        const double aux_mean =
            stack.aux_losses.empty()
                ? 0.0
                : std::accumulate(stack.aux_losses.begin(), stack.aux_losses.end(), 0.0) /
                      static_cast<double>(stack.aux_losses.size());
        rep["hte"] = {{"pruning_layers", out.pruning_layers},
                      {"layer_counts", out.layer_counts},
                      {"final_tokens", out.final_tokens},
                      {"total_dropped", dropped},
                      {"prune_records", records},
                      {"aux_loss", {{"per_layer", stack.aux_losses}, {"mean", aux_mean}}}};
    }

    const sip::SipResult rec = stage("sip", [&] {
        if (stack.visual.size() == 0 && !stack.records.empty()) {
            throw DegenerateInputError("every visual token was pruned; nothing to propagate from", 0);
        }
        return sip::sip_pass(stack.records, stack.visual.hidden, fused.unified, cfg.sip);
    });
    out.qrec = rec.qrec;
    out.n_pruned = rec.pruned_count();
    rep["sip"] = {{"n_pruned", out.n_pruned},
                  {"condensed_tokens", rec.state.vc.rows()},
                  {"iterations", rec.state.iteration},
                  {"deltas", rec.state.deltas},
                  {"qrec_loss", out.qrec},
                  {"qrec_per_token", out.n_pruned == 0 ? 0.0 : out.qrec / static_cast<double>(out.n_pruned)}};

    stage("metrics", [&] {
        json density = json::array();
        for (const auto& r : out.density.per_layer) {
            density.push_back({{"layer", r.layer},
                               {"tokens", r.tokens},
                               {"stable_rank", r.stable_rank},
                               {"coding_rate", r.coding_rate}});
        }
        rep["density"] = density;

        const auto toy = metrics::flops_estimate(cfg.llm, out.layer_counts, cfg.text_tokens);
        const std::vector<std::size_t> flat(cfg.llm.n_layers, out.base_tokens);
        const auto toy_vanilla = metrics::flops_estimate(cfg.llm, flat, cfg.text_tokens);
        out.flops_g = toy.total_g;
        out.flops_ratio = toy.total_g / toy_vanilla.total_g;
        json flops = {{"stack", flops_json(toy, toy_vanilla)}};

        json schedule = nullptr;
        json reference = nullptr;
        const std::size_t block = cfg.mke.r * cfg.mke.r;
        if (cfg.hte.mode == hte::PruneMode::kDropRate) {
            const auto analytic = metrics::token_schedule(cfg.mke, cfg.hte, cfg.llm, out.base_tokens);
            schedule = {{"layer_counts", analytic.layer_counts},
                        {"final_tokens", analytic.final_count},
                        {"final_ratio", analytic.final_ratio},
                        {"matches_observed",
                         analytic.layer_counts == out.layer_counts && analytic.final_count == out.final_tokens}};
            if (cfg.mke.bypass || kReferenceVisualTokens % block == 0) {
                const hte::LlmShape ref = hte::LlmShape::reference();
                const auto sched = metrics::token_schedule(cfg.mke, cfg.hte, ref, kReferenceVisualTokens);
                const auto ven = metrics::flops_estimate(ref, sched.layer_counts, kReferenceTextTokens);
                const std::vector<std::size_t> ref_flat(ref.n_layers, kReferenceVisualTokens);
                const auto vanilla = metrics::flops_estimate(ref, ref_flat, kReferenceTextTokens);
                reference = flops_json(ven, vanilla);
                reference["visual_tokens"] = kReferenceVisualTokens;
                reference["text_tokens"] = kReferenceTextTokens;
                reference["final_tokens"] = sched.final_count;
            }
        }
        flops["reference"] = reference;
        rep["flops"] = flops;
        rep["schedule"] = schedule;
    });

    rep["tokens"] = {{"base", out.base_tokens},
                     {"input", out.unified_tokens},
                     {"input_pct", out.input_pct()},
                     {"final", out.final_tokens},
                     {"final_pct", out.final_pct()}};

    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

json report_with_timing(const PipelineResult& result) {
    json j = result.report;
    j["timing"] = {{"wall_ms", result.wall_ms}};
    return j;
}

json strip_timing(json report) {
    report.erase("timing");
    return report;
}

std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::vector<FileContents> render_outputs(const PipelineResult& result, const PipelineConfig& cfg,
                                         const fs::path& out_dir) {
    std::vector<FileContents> files;
    if (cfg.wants("json")) files.emplace_back(out_dir / "report.json", report_with_timing(result).dump(2) + "\n");
    if (cfg.wants("csv")) {
        std::ostringstream csv;
        csv << "layer,tokens,stable_rank,coding_rate\n";
        for (const auto& r : result.density.per_layer) {
            csv << r.layer << ',' << r.tokens << ',' << format_number(r.stable_rank) << ','
                << format_number(r.coding_rate) << '\n';
        }
        files.emplace_back(out_dir / "density.csv", csv.str());
    }
    if (cfg.wants("svg")) {
        for (auto& f : render_density_plots(result.report, out_dir)) files.push_back(std::move(f));
    }
    return files;
}

const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes = {"drop_rate", "k_self", "k_cross", "omega", "merge_ratios"};
    return axes;
}

namespace {

double parse_double(const std::string& axis, const std::string& text) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end) throw ConfigError("sweep: bad value '" + text + "' for axis " + axis);
    return v;
}

}  // namespace

PipelineConfig apply_axis(PipelineConfig cfg, const std::string& axis, const std::string& value) {
    if (axis == "drop_rate") {
        cfg.hte.drop_rate = parse_double(axis, value);
    } else if (axis == "k_self") {
        cfg.mke.k_self = parse_double(axis, value);
    } else if (axis == "k_cross") {
        cfg.mke.k_cross = parse_double(axis, value);
    } else if (axis == "omega") {
        cfg.sip.omega = parse_double(axis, value);
    } else if (axis == "merge_ratios") {
        const auto colon = value.find(':');
        if (colon == std::string::npos) throw ConfigError("sweep: merge_ratios values look like 'k_self:k_cross'");
        cfg.mke.k_self = parse_double(axis, value.substr(0, colon));
        cfg.mke.k_cross = parse_double(axis, value.substr(colon + 1));
    } else {
        throw ConfigError("sweep: unknown axis '" + axis + "'");
    }
    cfg.validate();
    return cfg;
}

SweepRow sweep_row(const std::string& value, const PipelineResult& r) {
    return SweepRow{.value = value,
                    .input_tokens = r.unified_tokens,
                    .final_tokens = r.final_tokens,
                    .input_pct = r.input_pct(),
                    .final_pct = r.final_pct(),
                    .flops_g = r.flops_g,
                    .flops_ratio = r.flops_ratio,
                    .mean_stable_rank = mean_of(r.density.per_layer, &metrics::DensityRow::stable_rank),
                    .mean_coding_rate = mean_of(r.density.per_layer, &metrics::DensityRow::coding_rate),
                    .qrec = r.qrec};
}

std::vector<SweepRow> sweep(const PipelineConfig& cfg, const std::string& axis, const std::vector<std::string>& values) {
    if (std::ranges::find(sweep_axes(), axis) == sweep_axes().end()) {
        throw ConfigError("sweep: unknown axis '" + axis + "'");
    }
    std::vector<PipelineConfig> cfgs;
    for (const auto& v : values) cfgs.push_back(apply_axis(cfg, axis, v));
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < values.size(); ++i) rows.push_back(sweep_row(values[i], run_pipeline(cfgs[i])));
    return rows;
}

std::string sweep_csv(const std::string& axis, const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << axis
        << ",input_tokens,final_tokens,input_pct,final_pct,flops_g,flops_ratio,mean_stable_rank,mean_coding_rate,"
           "qrec_loss\n";
    for (const auto& r : rows) {
        out << r.value << ',' << r.input_tokens << ',' << r.final_tokens << ',' << format_number(r.input_pct) << ','
            << format_number(r.final_pct) << ',' << format_number(r.flops_g) << ',' << format_number(r.flops_ratio)
            << ',' << format_number(r.mean_stable_rank) << ',' << format_number(r.mean_coding_rate) << ','
            << format_number(r.qrec) << '\n';
    }
    return out.str();
}

}  // namespace tokcompact
