#pragma once

#include <stdexcept>
#include <string>

namespace doctorrag {

// Failure categories, aligned with the CLI exit-code contract:
// config -> 2, input -> 3, backend -> 4, internal -> 5.
enum class ErrorCategory { config, input, backend, internal };

const char* to_string(ErrorCategory category);

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

// Bad configuration: unknown keys, invalid values, missing template placeholders.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message)
        : Error(ErrorCategory::config, message) {}
};

// A template lookup or render failure; the message names the offending key or placeholder.
class TemplateError : public ConfigError {
public:
    explicit TemplateError(const std::string& message) : ConfigError(message) {}
};

// Malformed or inconsistent input data: unreadable files, duplicate or unknown ids.
class InputError : public Error {
public:
    explicit InputError(const std::string& message)
        : Error(ErrorCategory::input, message) {}
};

// An on-disk artifact violates its format contract (version, dimension, counts).
class FormatError : public InputError {
public:
    explicit FormatError(const std::string& message) : InputError(message) {}
};

// A stored or supplied vector makes the requested score undefined (zero norm).
class ScoreError : public InputError {
public:
    explicit ScoreError(const std::string& message) : InputError(message) {}
};

// The backend could not be reached, or retries were exhausted on transient failures.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& message)
        : Error(ErrorCategory::backend, message) {}
};

// The backend answered with a non-success status; carries status and body.
class BackendError : public Error {
public:
    BackendError(int status, const std::string& body, const std::string& message)
        : Error(ErrorCategory::backend, message), status_(status), body_(body) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

// The model's reply violates the output contract of a pipeline stage
// (empty statement, unknown concept code, unparseable verdict, ...).
class ModelOutputError : public Error {
public:
    ModelOutputError(const std::string& stage, const std::string& message)
        : Error(ErrorCategory::backend, stage + ": " + message), stage_(stage) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

// An engine-internal precondition was violated by the caller.
class ContractError : public Error {
public:
    explicit ContractError(const std::string& message)
        : Error(ErrorCategory::internal, message) {}
};

} // namespace doctorrag
