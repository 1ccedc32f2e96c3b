// Copyright 2026 The tokcompact Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tokcompact {

enum class ErrorKind {
    kShape,
    kConfig,
    kData,
    kParse,
    kDegenerate,
    kInternal,
};

const char* to_string(ErrorKind kind);

// Base of every error thrown by the library. The kind decides the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& message) : Error(ErrorKind::kShape, message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(ErrorKind::kConfig, message) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(ErrorKind::kData, message) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t byte_offset);

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// Input that makes an operation undefined (zero-norm row, too few tokens, ...).
class DegenerateInputError : public Error {
public:
    DegenerateInputError(const std::string& message, std::size_t index);

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// Exit codes: 0 ok, 2 config error, 3 data error, 4 internal error.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace tokcompact
