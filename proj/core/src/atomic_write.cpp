// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/atomic_write.hpp"

#include <fstream>
#include <system_error>

#include "tokcompact/error.hpp"

namespace tokcompact {

namespace fs = std::filesystem;

void write_files_atomically(const std::vector<FileContents>& files) {
    std::vector<fs::path> temps;
    auto cleanup = [&] {
        std::error_code ec;
        for (const auto& t : temps) fs::remove(t, ec);
    };
    try {
        for (const auto& [target, contents] : files) {
            if (target.has_parent_path()) fs::create_directories(target.parent_path());
            fs::path tmp = target;
            tmp += ".partial";
            temps.push_back(tmp);
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
            out.close();
            if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        }
    } catch (const fs::filesystem_error& e) {
        cleanup();
        throw DataError(std::string("output: ") + e.what());
    } catch (...) {
        cleanup();
        throw;
    }
    for (std::size_t i = 0; i < files.size(); ++i) fs::rename(temps[i], files[i].first);
}

}  // namespace tokcompact
