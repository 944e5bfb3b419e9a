// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace lsgs {

/// Base of every error raised by the library. The category string is the
/// stable, machine-parsable token the CLI prints (e.g. "config-error").
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config-error", what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error("data-error", what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error("shape-error", what) {}
};

class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& what) : Error("training-error", what) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error("contract-error", what) {}
};

class UndefinedMetricError : public Error {
public:
    explicit UndefinedMetricError(const std::string& what) : Error("undefined-metric", what) {}
};

} // namespace lsgs
