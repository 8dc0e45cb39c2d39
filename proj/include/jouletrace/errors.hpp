#pragma once

#include <stdexcept>
#include <string>

namespace jouletrace {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A trace had no samples (or fewer than an operation requires).
class EmptyTraceError : public Error {
public:
    using Error::Error;
};

/// Trace timestamps were not strictly increasing, or the trace is
/// otherwise structurally unusable.
class MalformedTraceError : public Error {
public:
    using Error::Error;
};

/// Two counter readings refer to different power domains.
class DomainMismatchError : public Error {
public:
    using Error::Error;
};

class InvalidArgumentError : public Error {
public:
    using Error::Error;
};

/// Input file or stream did not conform to its declared format.
/// Carries the 1-based line number of the offending record (0 when the
/// failure is not tied to a specific line, e.g. an empty file).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

/// The platform does not expose the requested counter source.
class UnsupportedPlatformError : public Error {
public:
    using Error::Error;
};

/// The counter source exists but the caller lacks permission to read it.
class PrivilegeError : public Error {
public:
    using Error::Error;
};

/// Comparing two experiment results whose plans differ in more than
/// sampling rate.
class InvalidComparisonError : public Error {
public:
    using Error::Error;
};

/// A profiled operation has no cost entry in strict estimation mode.
class MissingCostError : public Error {
public:
    MissingCostError(const std::string& what, std::string operation)
        : Error(what), operation_(std::move(operation)) {}

    const std::string& operation() const { return operation_; }

private:
    std::string operation_;
};

class InsufficientPointsError : public Error {
public:
    using Error::Error;
};

/// All reference timestamps coincide; the regression has no unique fit.
class SingularFitError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace jouletrace
