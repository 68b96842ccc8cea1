#pragma once

#include <stdexcept>
#include <string>

namespace discern {

/// Broad failure category. Each maps to a documented CLI exit code.
enum class ErrorKind {
    config = 2,
    provider = 3,
    data = 4,
    stats = 5,
};

/// Base class for every error raised by the library.
///
/// `code()` is a short machine-readable name such as "MissingField" or
/// "SubsetTooLarge"; `what()` carries the human-readable message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
    std::string code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message, std::string code = "ConfigError")
        : Error(ErrorKind::config, std::move(code), message) {}
};

class DataError : public Error {
public:
    DataError(std::string code, const std::string& message)
        : Error(ErrorKind::data, std::move(code), message) {}
};

class StatsError : public Error {
public:
    StatsError(std::string code, const std::string& message)
        : Error(ErrorKind::stats, std::move(code), message) {}
};

class ProviderError : public Error {
public:
    ProviderError(std::string code, const std::string& message, int status = 0)
        : Error(ErrorKind::provider, std::move(code), message), status_(status) {}

    /// HTTP status when one was received, otherwise 0.
    int status() const noexcept { return status_; }

private:
    int status_;
};

class AuthError : public ProviderError {
public:
    AuthError(const std::string& message, int status)
        : ProviderError("AuthError", message, status) {}
};

/// A single datapoint could not be perturbed. Caught by apply_plan and
/// recorded as an exclusion; never aborts a run.
class PerturbationError : public DataError {
public:
    using DataError::DataError;
};

/// Wraps an error with the pipeline stage it came from ("perturb", ...).
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error(cause.kind(), cause.code(), "[" + stage + "] " + cause.what()),
          stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace discern
