#pragma once

#include <stdexcept>
#include <string>

namespace factcheck {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Malformed input file or record. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Failure talking to a remote model endpoint (chat or embeddings).
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, int status, bool retryable, int attempts = 1)
        : Error(what), status_(status), retryable_(retryable), attempts_(attempts) {}

    /// HTTP status, or 0 for transport failures.
    int status() const noexcept { return status_; }
    bool retryable() const noexcept { return retryable_; }
    int attempts() const noexcept { return attempts_; }

private:
    int status_;
    bool retryable_;
    int attempts_;
};

}  // namespace factcheck
