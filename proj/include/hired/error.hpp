#pragma once

#include <stdexcept>
#include <string>

namespace hired {

/// Base of every exception the library throws. `kind()` is a short,
/// machine-parseable class name used by the CLI in its one-line error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Tensor/matrix dimensions that do not line up.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& message) : Error("shape_error", message) {}
};

/// Malformed or inconsistent input files.
class DataError : public Error {
public:
    explicit DataError(const std::string& message, std::size_t line = 0)
        : Error("data_error", line ? message + " (line " + std::to_string(line) + ")" : message),
          line_(line) {}

    /// 1-based line number of the offending row, or 0 when not tied to a line.
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid configuration values or keys.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

/// NaN/Inf encountered in a gradient, loss, or solver.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error("numeric_error", message) {}
};

}  // namespace hired
