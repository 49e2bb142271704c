#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relgraph {

/// Base of every error thrown by the library. `code()` is a stable,
/// machine-readable token used by the CLI and the HTTP service.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Malformed input text. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(std::string code, std::size_t line, const std::string& message)
        : Error(std::move(code),
                line == 0 ? message : "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NotFound : public Error {
public:
    explicit NotFound(const std::string& message) : Error("not_found", message) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message, std::string code = "validation")
        : Error(std::move(code), message) {}
};

class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& message) : Error("provider", message) {}
};

} // namespace relgraph
