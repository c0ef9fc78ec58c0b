#pragma once

#include <stdexcept>
#include <string>

namespace pnlos {

/// Malformed or inconsistent run configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Corrupt or unreadable on-disk data. CLI exit code 3.
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (NaN state, degenerate division). CLI exit code 4.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace pnlos
