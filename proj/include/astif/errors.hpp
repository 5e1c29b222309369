#pragma once

#include <stdexcept>
#include <string>

namespace astif {

/// Invalid configuration or arguments. Maps to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable, malformed, or inconsistent input data. Maps to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Failure while computing (non-finite loss, dead endpoint, ...). Maps to exit code 3.
class EngineError : public std::runtime_error {
public:
    explicit EngineError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace astif
