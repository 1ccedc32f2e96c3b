// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tokcompact {

using FileContents = std::pair<std::filesystem::path, std::string>;

// Writes every file to a temporary sibling first and renames only after all
// temporaries are complete. On failure the temporaries are removed and no
// target is touched.
void write_files_atomically(const std::vector<FileContents>& files);

}  // namespace tokcompact
