#pragma once

#include <stdexcept>
#include <string>

namespace ruletensor {

/// Bad or inconsistent configuration (CLI flags, config file, bounds).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Unreadable or malformed input data (CSV, rule files).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value or numeric failure inside a computation.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ruletensor
