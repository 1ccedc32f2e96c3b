// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/features_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tokcompact/error.hpp"

namespace tokcompact {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "feature payloads are read as little-endian");

std::string read_file(const fs::path& p, const char* what) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError(std::string("cannot open ") + what + " '" + p.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t dtype_size(Dtype d) { return d == Dtype::kF32 ? 4 : 8; }

FeatureHeader parse_header(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("feature header: ") + e.what(), e.byte);
    }
    // Structural problems are reported at the end of the document.
    const std::size_t end = text.size();
    auto fail = [&](const std::string& msg) -> ParseError { return ParseError("feature header: " + msg, end); };
    if (!j.is_object()) throw fail("not an object");
    if (j.value("format", std::string()) != kFeatureFormat) throw fail("format is not '" + std::string(kFeatureFormat) + "'");
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kFeatureFormatVersion)
        throw fail("unsupported version");

    FeatureHeader h;
    if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() != 3) throw fail("dims must be [H, W, D]");
    for (const auto& d : j["dims"]) {
        if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) throw fail("dims must be positive integers");
        h.dims.push_back(d.get<std::size_t>());
    }
    const std::string dtype = j.value("dtype", std::string());
    if (dtype == "f32") h.dtype = Dtype::kF32;
    else if (dtype == "f64") h.dtype = Dtype::kF64;
    else throw fail("dtype must be \"f32\" or \"f64\"");
    if (j.value("byte_order", std::string()) != "little") throw fail("byte_order must be \"little\"");
    if (!j.contains("branch") || !j["branch"].is_string()) throw fail("missing branch name");
    h.branch = j["branch"].get<std::string>();
    if (!j.contains("payload") || !j["payload"].is_string()) throw fail("missing payload file name");
    h.payload = j["payload"].get<std::string>();
    return h;
}

}  // namespace

std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    return out;
}

fs::path save_features(const FeatureMap& f, const fs::path& dir, const std::string& branch, Dtype dtype) {
    if (!f.is_grid()) throw ShapeError("save_features: feature map is not grid-shaped");
    if (branch.empty()) throw ConfigError("save_features: empty branch name");
    fs::create_directories(dir);

    std::string payload;
    payload.reserve(f.tokens.size() * dtype_size(dtype));
    for (double v : f.tokens.data()) {
        char buf[8];
        if (dtype == Dtype::kF32) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            std::memcpy(buf, &bits, 4);
            payload.append(buf, 4);
        } else {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            std::memcpy(buf, &bits, 8);
            payload.append(buf, 8);
        }
    }

    json j;
    j["format"] = kFeatureFormat;
    j["version"] = kFeatureFormatVersion;
    j["dims"] = {f.height, f.width, f.dim()};
    j["dtype"] = dtype == Dtype::kF32 ? "f32" : "f64";
    j["byte_order"] = "little";
    j["branch"] = branch;
    j["payload"] = branch + ".bin";

    const fs::path header_path = dir / (branch + ".json");
    std::ofstream(dir / (branch + ".bin"), std::ios::binary).write(payload.data(), static_cast<std::streamsize>(payload.size()));
    std::ofstream(header_path, std::ios::binary) << j.dump(2) << '\n';
    return header_path;
}

LoadedFeatures load_features(const fs::path& header_path) {
    const std::string text = read_file(header_path, "feature header");
    LoadedFeatures out;
    out.header = parse_header(text);
    out.digest = fnv1a64_hex(text);

    const auto& dims = out.header.dims;
    const std::size_t count = dims[0] * dims[1] * dims[2];
    const std::size_t width = dtype_size(out.header.dtype);
    const std::string payload = read_file(header_path.parent_path() / out.header.payload, "feature payload");
    if (payload.size() != count * width) {
        throw DataError("feature payload '" + out.header.payload + "' holds " + std::to_string(payload.size()) +
                        " bytes, expected " + std::to_string(count * width));
    }

    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        double v;
        if (out.header.dtype == Dtype::kF32) {
            std::uint32_t bits;
            std::memcpy(&bits, payload.data() + i * 4, 4);
            v = static_cast<double>(std::bit_cast<float>(bits));
        } else {
            std::uint64_t bits;
            std::memcpy(&bits, payload.data() + i * 8, 8);
            v = std::bit_cast<double>(bits);
        }
        if (!std::isfinite(v)) throw DataError("feature payload: non-finite value at flat index " + std::to_string(i));
        values[i] = v;
    }
    out.map = FeatureMap::from_grid(dims[0], dims[1], Matrix(dims[0] * dims[1], dims[2], std::move(values)));
    return out;
}

}  // namespace tokcompact
