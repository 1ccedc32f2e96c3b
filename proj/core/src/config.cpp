// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/config.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>

#include "tokcompact/error.hpp"

namespace tokcompact {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::vector<std::string> kFormats = {"json", "csv", "svg"};

// Reads a section while tracking which keys were consumed.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(name_ + "." + key + ": wrong type");
        }
    }

    // Unsigned integers are rejected when negative or fractional.
    void read_count(const char* key, std::size_t& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned()) throw ConfigError(name_ + "." + key + ": expected a non-negative integer");
        out = v.get<std::size_t>();
    }

    void read_number(const char* key, double& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(name_ + "." + key + ": expected a number");
        out = v.get<double>();
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.contains(k)) throw ConfigError(name_ + ": unknown key '" + k + "'");
        }
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string, std::less<>> seen_;
};

fs::path resolve(const fs::path& p, const fs::path& base) {
    return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

void PipelineConfig::validate() const {
    mke.validate();
    hte.validate();
    sip.validate();
    llm.validate();
    if (!(epsilon > 0.0)) throw ConfigError("metrics.epsilon must be positive");
    if (features.source == FeatureSource::kSynthetic) {
        if (features.height == 0 || features.width == 0 || features.dim == 0)
            throw ConfigError("features: grid and dim must be positive");
        if (!(features.rho >= 0.0 && features.rho <= 1.0)) throw ConfigError("features.rho must lie in [0, 1]");
    } else if (features.main_path.empty() || features.extra_path.empty()) {
        throw ConfigError("features: file source needs both 'main' and 'extra' header paths");
    }
    if (llm.hidden_dim % 4 != 0) throw ConfigError("llm.hidden_dim must be divisible by 4 for 2-D RoPE");
    for (const auto& f : formats) {
        if (std::ranges::find(kFormats, f) == kFormats.end()) throw ConfigError("output.formats: unknown format '" + f + "'");
    }
    if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

bool PipelineConfig::wants(const std::string& format) const { return std::ranges::find(formats, format) != formats.end(); }

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
    PipelineConfig cfg;
    Section root(j, "config");
    std::size_t seed = 0;
    root.read_count("seed", seed);
    cfg.seed = seed;
    root.read_count("text_tokens", cfg.text_tokens);

    if (const json* f = root.child("features")) {
        Section s(*f, "features");
        std::string source = "synthetic";
        s.read("source", source);
        if (source == "synthetic") cfg.features.source = FeatureSource::kSynthetic;
        else if (source == "files") cfg.features.source = FeatureSource::kFiles;
        else throw ConfigError("features.source must be \"synthetic\" or \"files\"");
        std::vector<std::size_t> grid;
        s.read("grid", grid);
        if (!grid.empty()) {
            if (grid.size() != 2) throw ConfigError("features.grid must be [H, W]");
            cfg.features.height = grid[0];
            cfg.features.width = grid[1];
        }
        s.read_count("dim", cfg.features.dim);
        s.read_number("rho", cfg.features.rho);
        std::string main_path, extra_path;
        s.read("main", main_path);
        s.read("extra", extra_path);
        if (!main_path.empty()) cfg.features.main_path = resolve(main_path, base_dir);
        if (!extra_path.empty()) cfg.features.extra_path = resolve(extra_path, base_dir);
        s.finish();
    }
    if (const json* m = root.child("mke")) {
        Section s(*m, "mke");
        s.read_count("r", cfg.mke.r);
        s.read_number("k_self", cfg.mke.k_self);
        s.read_number("k_cross", cfg.mke.k_cross);
        s.read("bypass", cfg.mke.bypass);
        s.finish();
    }
    if (const json* h = root.child("hte")) {
        Section s(*h, "hte");
        std::string schedule = hte::to_string(cfg.hte.schedule);
        std::string mode = hte::to_string(cfg.hte.mode);
        std::string score = hte::to_string(cfg.hte.score_fn);
        s.read("schedule", schedule);
        s.read("mode", mode);
        s.read("score_fn", score);
        cfg.hte.schedule = hte::parse_schedule(schedule);
        cfg.hte.mode = hte::parse_prune_mode(mode);
        cfg.hte.score_fn = hte::parse_score_fn(score);
        s.read_count("sparse_step", cfg.hte.sparse_step);
        s.read_number("drop_rate", cfg.hte.drop_rate);
        s.read_number("threshold", cfg.hte.threshold);
        s.read("renormalize", cfg.hte.renormalize);
        s.finish();
    }
    if (const json* p = root.child("sip")) {
        Section s(*p, "sip");
        if (const json* l = s.child("lambda"); l && !l->is_null()) {
            if (!l->is_number()) throw ConfigError("sip.lambda: expected a number or null");
            cfg.sip.lambda = l->get<double>();
        }
        s.read_count("topk", cfg.sip.topk);
        s.read_number("omega", cfg.sip.omega);
        s.read_count("iterations", cfg.sip.iterations);
        s.read_count("fsq_levels", cfg.sip.fsq_levels);
        s.finish();
    }
    if (const json* l = root.child("llm")) {
        Section s(*l, "llm");
        s.read_count("n_layers", cfg.llm.n_layers);
        s.read_count("hidden_dim", cfg.llm.hidden_dim);
        s.read_count("n_heads", cfg.llm.n_heads);
        s.read_count("ffn_dim", cfg.llm.ffn_dim);
        s.read_count("expert_ffn_dim", cfg.llm.expert_ffn_dim);
        s.read_count("n_visual_experts", cfg.llm.n_visual_experts);
        s.read_count("router_topk", cfg.llm.router_topk);
        s.finish();
    }
    if (const json* m = root.child("metrics")) {
        Section s(*m, "metrics");
        s.read_number("epsilon", cfg.epsilon);
        s.finish();
    }
    if (const json* o = root.child("output")) {
        Section s(*o, "output");
        std::string dir = cfg.output_dir.string();
        s.read("dir", dir);
        cfg.output_dir = dir;
        s.read("formats", cfg.formats);
        s.finish();
    }
    root.finish();
    cfg.hte.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    json f;
    if (cfg.features.source == FeatureSource::kSynthetic) {
        f["source"] = "synthetic";
        f["grid"] = {cfg.features.height, cfg.features.width};
        f["dim"] = cfg.features.dim;
        f["rho"] = cfg.features.rho;
    } else {
        f["source"] = "files";
        f["main"] = cfg.features.main_path.generic_string();
        f["extra"] = cfg.features.extra_path.generic_string();
    }
    j["features"] = f;
    j["mke"] = {{"r", cfg.mke.r}, {"k_self", cfg.mke.k_self}, {"k_cross", cfg.mke.k_cross}, {"bypass", cfg.mke.bypass}};
    j["hte"] = {{"schedule", hte::to_string(cfg.hte.schedule)},
                {"sparse_step", cfg.hte.sparse_step},
                {"mode", hte::to_string(cfg.hte.mode)},
                {"drop_rate", cfg.hte.drop_rate},
                {"threshold", cfg.hte.threshold},
                {"score_fn", hte::to_string(cfg.hte.score_fn)},
                {"renormalize", cfg.hte.renormalize}};
    j["sip"] = {{"lambda", cfg.sip.lambda ? json(*cfg.sip.lambda) : json(nullptr)},
                {"topk", cfg.sip.topk},
                {"omega", cfg.sip.omega},
                {"iterations", cfg.sip.iterations},
                {"fsq_levels", cfg.sip.fsq_levels}};
    j["llm"] = {{"n_layers", cfg.llm.n_layers},
                {"hidden_dim", cfg.llm.hidden_dim},
                {"n_heads", cfg.llm.n_heads},
                {"ffn_dim", cfg.llm.ffn_dim},
                {"expert_ffn_dim", cfg.llm.expert_ffn_dim},
                {"n_visual_experts", cfg.llm.n_visual_experts},
                {"router_topk", cfg.llm.router_topk}};
    j["text_tokens"] = cfg.text_tokens;
    j["metrics"] = {{"epsilon", cfg.epsilon}};
    j["output"] = {{"dir", cfg.output_dir.generic_string()}, {"formats", cfg.formats}};
    return j;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON at byte " + std::to_string(e.byte));
    }
    return config_from_json(j, path.parent_path());
}

}  // namespace tokcompact
