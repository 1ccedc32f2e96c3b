// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokcompact/error.hpp"

namespace tokcompact {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kShape: return "shape error";
        case ErrorKind::kConfig: return "config error";
        case ErrorKind::kData: return "data error";
        case ErrorKind::kParse: return "parse error";
        case ErrorKind::kDegenerate: return "degenerate input";
        case ErrorKind::kInternal: return "internal error";
    }
    return "error";
}

Error::Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

ParseError::ParseError(const std::string& message, std::size_t byte_offset)
    : Error(ErrorKind::kParse, message + " (at byte " + std::to_string(byte_offset) + ")"),
      byte_offset_(byte_offset) {}

DegenerateInputError::DegenerateInputError(const std::string& message, std::size_t index)
    : Error(ErrorKind::kDegenerate, message), index_(index) {}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::kConfig: return 2;
        case ErrorKind::kData:
        case ErrorKind::kParse:
        case ErrorKind::kDegenerate: return 3;
        case ErrorKind::kShape:
        case ErrorKind::kInternal: return 4;
    }
    return 4;
}

}  // namespace tokcompact
