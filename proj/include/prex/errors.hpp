#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace prex {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or unsupported file contents (WAV headers, JSON schemas).
class FormatError : public Error {
    using Error::Error;
};

/// Text inputs that fail to parse (PHN annotations, config files).
class ParseError : public Error {
    using Error::Error;
};

/// Filesystem and OS-level failures.
class IoError : public Error {
    using Error::Error;
};

/// Violated preconditions: bad indices, empty vocabularies, invalid plans.
class InvalidArgument : public Error {
    using Error::Error;
};

/// Recognizer failures: launch errors, non-zero exits, timeouts.
class RecognizerError : public Error {
public:
    RecognizerError(const std::string& what, int exit_code, std::string stderr_output,
                    bool timed_out = false)
        : Error(what),
          exit_code_(exit_code),
          stderr_(std::move(stderr_output)),
          timed_out_(timed_out) {}

    int exit_code() const noexcept { return exit_code_; }
    const std::string& stderr_output() const noexcept { return stderr_; }
    bool timed_out() const noexcept { return timed_out_; }

private:
    int exit_code_;
    std::string stderr_;
    bool timed_out_;
};

/// Runtime warnings (underpowered plans, constant feature columns) go through
/// a process-wide handler so embedders and tests can redirect them.
using WarningHandler = void (*)(const std::string&);

inline WarningHandler& warning_handler_ref() {
    static WarningHandler handler = nullptr;
    return handler;
}

inline WarningHandler set_warning_handler(WarningHandler handler) {
    return std::exchange(warning_handler_ref(), handler);
}

inline void warn(const std::string& message) {
    if (WarningHandler handler = warning_handler_ref()) {
        handler(message);
    } else {
        std::fprintf(stderr, "prex: warning: %s\n", message.c_str());
    }
}

}  // namespace prex
